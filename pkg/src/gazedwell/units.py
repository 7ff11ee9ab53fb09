"""Time base shared by every module: the 60 Hz gaze sample clock."""

SAMPLE_RATE_HZ = 60.0

# One gaze sample period in milliseconds (16.666... ms, often displayed as 16.67).
TS_MS = 1000.0 / SAMPLE_RATE_HZ


def samples_to_ms(n: float) -> float:
    return n * TS_MS


def ms_to_samples(ms: float) -> float:
    return ms / TS_MS
