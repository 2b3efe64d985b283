"""Load the bundled FM configurations and render a short phrase.

Shows the config file grammar, the routing summary of each patch, and a
render driven by hand-drawn envelopes and a stepped f0 line. Writes
phrase.wav next to this script.
"""

from pathlib import Path
from importlib import resources

import numpy as np

from fmresynth import dataset as ds
from fmresynth import fmsynth as fm

config_dir = resources.files("fmresynth") / "configs"

print("bundled configurations")
for path in sorted(config_dir.iterdir()):
    config = fm.parse_config(path.read_text())
    carriers = [i + 1 for i in config.carrier_indices]
    print(f"  {config.name:<14} {config.n_oscillators} osc, "
          f"carriers {carriers}, source patch {config.source_patch!r}")

config = fm.parse_config((config_dir / "flute1.fm").read_text())
print()
print("flute1 on disk:")
print(fm.serialize_config(config))

# a 2-second phrase: two held notes with attack/decay envelopes
T = 500
f0 = np.where(np.arange(T) < T // 2, 392.0, 523.3)   # G4 then C5
attack = np.minimum(np.arange(T) / 25.0, 1.0)
fade = np.clip((T - np.arange(T)) / 50.0, 0.0, 1.0)
carrier_env = attack * fade

env = np.zeros((T, config.n_oscillators))
a_max = config.a_max(2.0)
for k in range(config.n_oscillators):
    level = 0.9 if config.oscillators[k].carrier else 0.6
    env[:, k] = level * carrier_env * a_max[k]

spec = fm.RenderSpec(f0_frames=f0)
audio = fm.render(config, env, spec, i_max=2.0).values
out = Path(__file__).with_name("phrase.wav")
ds.write_wav(out, audio)
print(f"wrote {out} ({len(audio) / 16000:.1f}s, "
      f"peak {np.max(np.abs(audio)):.3f})")
