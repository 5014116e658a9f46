"""Transmission modes and instantaneous SNR regions of the two-way relay network."""
from __future__ import annotations

import enum

import numpy as np


class Role(enum.Enum):
    TRANSMIT = "T"
    RECEIVE = "R"
    SILENT = "S"


class TransmissionMode(enum.IntEnum):
    M1 = 1  # user 1 -> relay
    M2 = 2  # user 2 -> relay
    M3 = 3  # both users -> relay (multiple access)
    M4 = 4  # relay -> user 1 (from B2)
    M5 = 5  # relay -> user 2 (from B1)
    M6 = 6  # relay broadcasts to both
    M7 = 7  # all silent

    @property
    def roles(self) -> tuple[Role, Role, Role]:
        """(user 1, user 2, relay) roles."""
        return _ROLES[self]

    @property
    def is_relay_transmit(self) -> bool:
        return self in (TransmissionMode.M4, TransmissionMode.M5, TransmissionMode.M6)


T, R, S = Role.TRANSMIT, Role.RECEIVE, Role.SILENT
_ROLES = {
    TransmissionMode.M1: (T, S, R),
    TransmissionMode.M2: (S, T, R),
    TransmissionMode.M3: (T, T, R),
    TransmissionMode.M4: (R, S, T),
    TransmissionMode.M5: (S, R, T),
    TransmissionMode.M6: (R, R, T),
    TransmissionMode.M7: (S, S, S),
}
del T, R, S


class SnrRegion(enum.IntEnum):
    R1 = 1
    R2 = 2
    R3 = 3
    R4 = 4
    R5 = 5


# DECODABLE[region, mode] -> O_k for a slot in that region (row/col 0 unused).
DECODABLE = np.zeros((6, 8), dtype=bool)
DECODABLE[1, 1:7] = True
DECODABLE[2, [1, 2, 4, 5, 6]] = True
DECODABLE[3, [1, 4]] = True
DECODABLE[4, [2, 5]] = True
DECODABLE[:, 7] = True
DECODABLE[0, :] = False
