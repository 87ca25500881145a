"""Which Q-matrices give an identifiable DINA model?

Two things matter. Every attribute must be measured in isolation by at
least one item (completeness) and be required by three or more items in
total. Once one single-attribute item per attribute is set aside, no two
attributes may be required by exactly the same remaining items.

Run: python demos/01_check_designs.py
"""

import numpy as np

from dinaid import QMatrix, identifiability_verdict
from dinaid.catalog import DUPLICATE_COLUMN_DESIGNS, FOUR_ATTRIBUTE_DESIGN, IDENTIFIABLE_DESIGNS, two_attribute_design


def show(name, Q):
    report = identifiability_verdict(Q)
    print(f"{name:>16}  {Q.J}x{Q.K}  {report.summary()}")


print("Designs that separate every attribute:")
show("four_attribute", FOUR_ATTRIBUTE_DESIGN)
for name, Q in IDENTIFIABLE_DESIGNS.items():
    show(name, Q)

print("\nComplete, three items per attribute, yet two attributes always travel together:")
for name, Q in DUPLICATE_COLUMN_DESIGNS.items():
    show(name, Q)
show("two_attribute", two_attribute_design())

# Items that require nothing carry no information about the attributes and
# can be added or dropped freely.
padded = np.vstack([FOUR_ATTRIBUTE_DESIGN.entries, np.zeros((3, 4), dtype=np.uint8)])
print("\nWith three all-zero items appended:")
print(identifiability_verdict(padded).to_json(indent=2))

# The identity block alone is complete, but each attribute is measured once.
print()
show("identity only", QMatrix(np.eye(3, dtype=np.uint8)))
