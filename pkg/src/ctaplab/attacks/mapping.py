"""Which countermeasure is expected to stop which attack.

C_i fixes vulnerability V_i, so an attack is covered by the countermeasures
matching the vulnerabilities it relies on.  The transport is where the
countermeasure can actually bite: C3 only changes NFC, and C2 needs a user
holding a key over USB to notice the blinking.
"""

MAPPING = {
    "CI1": ("C1", "C2", "C3", "C6"),
    "CI2": ("C1", "C2", "C3", "C5"),
    "CI3": ("C1", "C2"),
    "CI4": ("C1", "C2"),
    "AC1": ("C1", "C2", "C4", "C7"),
    "AC2": ("C1", "C2", "C3", "C4", "C6"),
    "AC3": ("C1", "C2", "C3", "C5"),
    "AC4": ("C1", "C2", "C3"),
    "AC5": ("C1", "C2", "C4"),
    "AC6": ("C1", "C2", "C8"),
    "AC7": ("C1", "C2"),
}

def pair_transport(attack: str, cm: str, config) -> str:
    if cm == "C3":
        return "nfc"
    if cm == "C2" or attack == "AC6":
        return "usb"
    if attack in ("CI1", "CI2", "CI3", "CI4", "AC4") and "nfc" in config.transports:
        return "nfc"
    return "usb"


def expected_outcome(attack: str, cm: str) -> str:
    if cm == "C2":
        return "degraded"
    if cm == "C4" and attack == "AC5":
        return "degraded"
    return "blocked"


def pairs():
    for attack, cms in MAPPING.items():
        for cm in cms:
            yield attack, cm
