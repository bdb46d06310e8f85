"""
A short desk-scale training run
-------------------------------

Trains the guided generator on 200 synthetic epochs, then checks what
came out: loss curve, agent weights, alpha asymmetry of generated
epochs and the Fréchet distance in the classifier's feature space.

The full run is 200 epochs (about ten minutes on one core); pass a
smaller number to get a feel for it first::

    python3 demos/desk_run.py 20
"""

import sys
import time

import numpy as np

from eegdiff import evaluation as ev
from eegdiff import trainer as tr
from eegdiff.signal_core import synth_dataset

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
config = tr.desk_config(epochs=epochs)
data = synth_dataset(100, seed=0)

t0 = time.time()
trainer = tr.Trainer(config, data)
print("feature nets pretrained, held-out accuracy:", trainer.pretrain_acc)


def progress(t):
    if t.epoch % max(1, epochs // 10) == 0:
        last = t.manifest.iterations()[-1]
        print(f"epoch {t.epoch:3d}  diffusion loss {t.manifest.epoch_means('mse')[-1]:.3f}"
              f"  reward {t.manifest.epoch_means('total')[-1]:.3f}"
              f"  weights {last['w_d']:.2f} {last['w_tf']:.2f} {last['w_c']:.2f}  {time.time() - t0:.0f}s")


trainer.run(progress=progress)

labels = np.repeat([0, 1], 100)
gen = trainer.generate(labels, seed=1)
for c in (0, 1):
    m = ev.energy_map(trainer.standardizer.invert(gen[labels == c]), 250.0)
    print(f"generated class {c} alpha energy C3 {m[0]:.1f}  C4 {m[1]:.1f}")

real = synth_dataset(100, seed=77)
x = trainer.standardizer.apply(tr.prepare_epochs(real, config.bandpass_hz))
f_real = ev.compressed_features(trainer.classnet, config.net, x)
f_gen = ev.compressed_features(trainer.classnet, config.net, gen)
print("FID(real, generated):", round(ev.fid(f_real, f_gen).value, 4))
