"""Explicit recovery pairs for a unit segment: energies decrease toward (1 + alpha).

    python demos/recovery_sequence.py [--eps 0.08 0.04 0.02]
"""
import argparse

from steinerpf import Segment, SegmentNetwork, limit_energy
from steinerpf.oracles import build_recovery, recovery_mesh, segment_recovery_energy

p = argparse.ArgumentParser()
p.add_argument("--eps", type=float, nargs="+", default=[0.08, 0.04, 0.02])
p.add_argument("--alpha", type=float, default=0.05)
args = p.parse_args()

net = SegmentNetwork((Segment((0, 0), (1, 0)),))
print(f"limit energy {limit_energy(net, args.alpha):.4f}")
print(" eps     vertices  discrete  continuum  weak-div")
for eps in args.eps:
    mesh = recovery_mesh(net, args.alpha, eps)
    pair = build_recovery(net, args.alpha, eps, mesh)
    print(f"{eps:6.3f} {mesh.n_vertices:9d} {pair.energy().total:9.4f} "
          f"{segment_recovery_energy(1.0, args.alpha, eps):10.4f} {pair.divergence_error():9.2e}")
