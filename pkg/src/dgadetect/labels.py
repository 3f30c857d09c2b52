from enum import IntEnum


class Label(IntEnum):
    LEGIT = 0
    DGA = 1
