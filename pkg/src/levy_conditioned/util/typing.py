from typing import NewType

GridIndex = NewType("GridIndex", int)
Seed = NewType("Seed", int)
