"""Named synthetic fixtures shared by the CLI and the test-suite.

``planted``: one strong 3 Hz seizure channel among noise channels.
``triple``: three weak seizure channels that separate well only when fused;
evaluate it with ``TRIPLE_EVAL`` (coarser bins keep noise members from
over-fitting).
``tcp``: a 10-20 electrode recording suitable for the bipolar TCP montage.
"""

from .evaluation import EvalConfig
from .signal_io import TEN_TWENTY_ELECTRODES, SynthesisConfig

PRESETS = {
    "planted": dict(n_channels=6, schedule=[["interictal", 240.0], ["ictal", 60.0]] * 3,
                    seizure_channels=[0], ictal_amplitude=5.0),
    "triple": dict(n_channels=6, schedule=[["interictal", 120.0], ["ictal", 60.0]] * 10,
                   seizure_channels=[1, 3, 4], ictal_amplitude=0.5),
    "tcp": dict(n_channels=len(TEN_TWENTY_ELECTRODES), channel_names=list(TEN_TWENTY_ELECTRODES),
                schedule=[["interictal", 120.0], ["ictal", 60.0]], seizure_channels=[2], ictal_amplitude=5.0),
}

TRIPLE_EVAL = EvalConfig(min_count=10)


def preset_config(name: str, **overrides) -> SynthesisConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = dict(PRESETS[name])
    d.update(overrides)
    return SynthesisConfig.from_dict(d)
