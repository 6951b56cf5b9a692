"""Time the element kernels: numba loops against the vectorised numpy path.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 50]
"""

import argparse
import timeit

from transbeam import _kernels
from transbeam.assembly import _kernel_args
from transbeam.discretization import build_space, smooth_state
from transbeam.model import BeamParameters


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=64, help="elements per segment")
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()

    p = BeamParameters()
    space = build_space(p, args.n, args.n)
    z = space.full(smooth_state(space, amplitude=0.3).z)
    kargs = _kernel_args(space, p)
    seg = space.mesh.segment.astype("int64")

    cases = {
        "force": (_kernels.force_numpy, _kernels.force_numba, kargs + (1.0,)),
        "tangent": (_kernels.tangent_numpy, _kernels.tangent_numba, kargs + (1.0,)),
        "energy": (_kernels.energy_numpy, _kernels.energy_numba, kargs + (seg, 1.0)),
    }
    print(f"{space.mesh.n_elements} elements, {space.dofs.n_free} free DOFs")
    print(f"{'kernel':<10}{'numpy [us]':>14}{'numba [us]':>14}{'speedup':>10}")
    for name, (fnp, fnb, extra) in cases.items():
        if fnb is None:
            print(f"{name:<10} numba unavailable")
            continue
        fnb(z, *extra)  # compile outside the timing
        t_np = min(timeit.repeat(lambda: fnp(z, *extra), number=args.repeat, repeat=3))
        t_nb = min(timeit.repeat(lambda: fnb(z, *extra), number=args.repeat, repeat=3))
        per_np, per_nb = 1e6 * t_np / args.repeat, 1e6 * t_nb / args.repeat
        print(f"{name:<10}{per_np:>14.1f}{per_nb:>14.1f}{per_np / per_nb:>10.1f}")


if __name__ == "__main__":
    main()
