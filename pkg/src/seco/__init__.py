"""Self-supervised object-context association learning.

Two encoder streams (a small target crop and the surrounding scene with
the target blacked out) are pulled together in a shared embedding space.
The context stream reads from a trainable external memory via softmax
attention, so co-occurrence statistics accumulate in memory slots rather
than in the encoder weights alone.

Subpackage map:

- ``pairs``        region proposals, filtering, merging, pair mining
- ``augment``      photometric + context-aware geometric augmentation
- ``model``        encoders, projections, external memory, checkpoints
- ``objective``    invariance / variance / covariance objective
- ``trainer``      SGD loop, LR schedule, logging
- ``evaluation``   linear probes, lift-the-flap, priming maps, memory probe
- ``humanmaps``    click logs to smoothed ground-truth attention maps
- ``synthworld``   procedural scenes with controlled co-occurrence
- ``collection``   HTTP service for crowd-sourced click collection
- ``cli``          single ``seco`` entry point wiring it all together
"""

__version__ = "0.1.0"
