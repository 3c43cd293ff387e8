"""Frozen synthesis constants. Bump SYNTH_VERSION on any change.

Vowel formants are adult male averages from published American English
vowel measurements (Peterson & Barney 1952; Hillenbrand et al. 1995),
rounded to the nearest Hz. Diphthongs use a midpoint between onset and
offset targets.
"""

SYNTH_VERSION = 1

SAMPLE_RATE = 16_000
PHONEME_SAMPLES = 1_280  # 80 ms
BAND_LOW_HZ = 50.0
BAND_HIGH_HZ = 8_000.0
N_BANDS = 16
FORMANT_AMPLITUDES = (1.0, 0.6, 0.3)
NOISE_RMS = 0.35
VOICING_HZ = 120.0
VOICING_AMPLITUDE = 0.3
STOP_DECAY_S = 0.015

# 39-symbol ARPAbet inventory; position in this tuple keys the noise generator.
ARPABET = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH",
    "EH", "ER", "EY", "F", "G", "HH", "IH", "IY", "JH", "K",
    "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH",
    "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)

VOWEL_FORMANTS = {
    "IY": (342, 2322, 3000),
    "IH": (427, 2034, 2684),
    "EY": (476, 2089, 2691),
    "EH": (580, 1799, 2605),
    "AE": (588, 1952, 2601),
    "AA": (768, 1333, 2522),
    "AO": (652, 997, 2538),
    "OW": (497, 910, 2459),
    "UH": (469, 1122, 2434),
    "UW": (378, 997, 2343),
    "AH": (623, 1200, 2550),
    "ER": (474, 1379, 1710),
    "AY": (660, 1700, 2550),
    "AW": (680, 1150, 2450),
    "OY": (550, 960, 2400),
}

# nasals, liquids, glides: one sine each
SONORANT_HZ = {
    "M": 220.0,
    "N": 270.0,
    "NG": 330.0,
    "L": 380.0,
    "R": 450.0,
    "W": 300.0,
    "Y": 2200.0,
}

# pseudo-noise classes: (band low Hz, band high Hz, voiced, burst envelope)
NOISE_SHAPES = {
    "P": (200.0, 1500.0, False, True),
    "B": (200.0, 1500.0, True, True),
    "T": (3000.0, 7000.0, False, True),
    "D": (3000.0, 7000.0, True, True),
    "K": (1500.0, 3500.0, False, True),
    "G": (1500.0, 3500.0, True, True),
    "F": (1200.0, 7500.0, False, False),
    "V": (1200.0, 7500.0, True, False),
    "TH": (2500.0, 7900.0, False, False),
    "DH": (2500.0, 7900.0, True, False),
    "S": (4000.0, 7900.0, False, False),
    "Z": (4000.0, 7900.0, True, False),
    "SH": (2000.0, 5000.0, False, False),
    "ZH": (2000.0, 5000.0, True, False),
    "CH": (2200.0, 5500.0, False, True),
    "JH": (2200.0, 5500.0, True, True),
    "HH": (500.0, 3000.0, False, False),
}

assert set(VOWEL_FORMANTS) | set(SONORANT_HZ) | set(NOISE_SHAPES) == set(ARPABET)
