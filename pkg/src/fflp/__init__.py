"""Plastic spiking-network controller with a cycle-level accelerator model.

Subpackages:
    fp16       binary16 arithmetic emulation (scalar + vectorized)
    network    golden functional model of the three-layer plastic SNN
    model_io   FFLP binary model files and packed coefficient export
    evolution  offline rule search (parameter-exploring policy gradients)
    tasks      desk-scale control/classification environments + spike coding
    control    episode runner tying networks to tasks
    accel      cycle-level dual-engine accelerator simulator
    cli        reproducible command-line runs with manifests
"""

__version__ = "0.1.0"
