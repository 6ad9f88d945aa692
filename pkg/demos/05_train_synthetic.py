"""Training with TT layers on the synthetic stripes-vs-blobs task.

Trains a small dense CNN and a variant whose second convolution lives in TT
form at roughly half the kernel parameters, then demonstrates the two-stage
protocol: train the conv stack first, swap the classifier head for a TT
version, and fine-tune.  Everything is seeded and reproducible.
"""

import numpy as np

from ttconv.data import stripes_vs_blobs
from ttconv.nn import (
    Conv2D,
    Dense,
    MaxPool,
    Network,
    ReLU,
    SGDMomentum,
    TTConv,
    TTDense,
    evaluate,
    train,
)

EPOCHS = 12
data = stripes_vs_blobs(n_train=2000, n_test=500, seed=0)
print(f"dataset: {len(data.x_train)} train / {len(data.x_test)} test, "
      f"images {data.input_shape}")


def run(name, net, epochs=EPOCHS):
    net.build(data.input_shape, np.random.default_rng(42))
    opt = SGDMomentum(lr=0.03, momentum=0.9, decay_every=20, decay_factor=10.0)
    log = train(net, data, opt, epochs=epochs, seed=7, batch_size=128)
    final = log[-1]
    print(
        f"{name:12s} params {net.param_count:5d} compr {net.compression:5.2f} "
        f"train {100 * final['train_acc']:.1f}% test {100 * final['test_acc']:.1f}%"
    )
    return net, log


print("\n--- dense baseline vs TT-conv variant ---")
dense_net, _ = run(
    "dense", Network([Conv2D(3, 8), ReLU(), MaxPool(), Conv2D(3, 16), ReLU(), Dense(2)])
)
tt_net, _ = run(
    "tt-conv",
    Network([Conv2D(3, 8), ReLU(), MaxPool(), TTConv(3, 16, ranks=(6, 5), d=2), ReLU(), Dense(2)]),
)

# ----------------------------------------------------------------------
# Two-stage protocol: reuse the trained conv stack, swap in a TT head
# ----------------------------------------------------------------------
print("\n--- stage 2: replace the classifier head and fine-tune ---")
stage2 = Network(
    [Conv2D(3, 8), ReLU(), MaxPool(), TTConv(3, 16, ranks=(6, 5), d=2), ReLU(),
     TTDense(2, ranks=(4, 2), d=2)]
)
stage2.build(data.input_shape, np.random.default_rng(43))
for src, dst in zip(tt_net.layers[:5], stage2.layers[:5]):
    for p_src, p_dst in zip(src.params, dst.params):
        p_dst[...] = p_src

acc_before = evaluate(stage2, data.x_test, data.y_test)
print(f"fresh TT head, before fine-tuning: test {100 * acc_before:.1f}%")

opt = SGDMomentum(lr=0.01, momentum=0.9)
log = train(stage2, data, opt, epochs=6, seed=11, batch_size=128)
print(
    f"after fine-tuning:  test {100 * log[-1]['test_acc']:.1f}% "
    f"(network compression {stage2.compression:.2f}x)"
)

# optionally freeze the conv stack instead of fine-tuning everything
for layer in stage2.layers[:5]:
    layer.frozen = True
log = train(stage2, data, SGDMomentum(lr=0.01, momentum=0.9), epochs=2, seed=12, batch_size=128)
print(f"head-only epochs keep conv weights bitwise fixed; test {100 * log[-1]['test_acc']:.1f}%")
