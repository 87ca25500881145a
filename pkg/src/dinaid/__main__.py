import sys

from dinaid.cli import main

sys.exit(main())
