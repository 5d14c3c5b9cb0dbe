"""Time the numba kernels against their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--qubits 10 14 18] [--gates 200] [--repeat 5]

The kernel table calls both implementations in one process. The end-to-end
row runs a noisy sampling job in a subprocess per backend, switched with
LIGHTCONE_DISABLE_NUMBA.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from lightcone import _kernels as K

END_TO_END = """
import time
from lightcone import _kernels
from lightcone.circuit import bind
from lightcone.problems import get_problem
from lightcone.simulator import NoiseModel, sample
p = get_problem("dragon")
c = bind(p.circuit, p.optimum)
t0 = time.perf_counter()
for term in p.hamiltonian.measured_terms:
    sample(c, term, 5000, NoiseModel.default(5), seed=1)
print(_kernels.backend(), time.perf_counter() - t0)
"""


def _random_layer(rng, n, n_gates):
    mats = np.zeros((n_gates, 4, 4), dtype=np.complex128)
    qa = rng.integers(0, n, n_gates)
    qb = (qa + rng.integers(1, n, n_gates)) % n
    arity = rng.integers(1, 3, n_gates)
    for i in range(n_gates):
        d = 2 if arity[i] == 1 else 4
        q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        mats[i, :d, :d] = q
    return mats, qa.astype(np.int64), qb.astype(np.int64), arity.astype(np.int64)


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(qubits, n_gates, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in qubits:
        mats, qa, qb, arity = _random_layer(rng, n, n_gates)
        psi0 = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi0 /= np.linalg.norm(psi0)
        probs = np.abs(psi0) ** 2
        xmask, zmask = 0b1011 % (1 << n), 0b0110 % (1 << n)
        impls = {"numpy": (K._np_run_gates, K._np_pauli_expectation, K._np_z_parity_probs)}
        if K.HAVE_NUMBA:
            impls["numba"] = (K._nb_run_gates, K._nb_pauli_expectation, K._nb_z_parity_probs)
            # compile outside the timed region
            K._nb_run_gates(psi0.copy(), n, mats[:1], qa[:1], qb[:1], arity[:1])
            K._nb_pauli_expectation(psi0, xmask, zmask, 1)
            K._nb_z_parity_probs(probs, zmask)
        for name, (run, pexp, zpar) in impls.items():
            rows.append((
                n, name,
                _best(lambda: run(psi0.copy(), n, mats, qa, qb, arity), repeat),
                _best(lambda: pexp(psi0, xmask, zmask, 1), repeat),
                _best(lambda: zpar(probs, zmask), repeat),
            ))
    return rows


def bench_end_to_end():
    out = []
    for flag in ("0", "1"):
        env = dict(os.environ, LIGHTCONE_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        name, secs = res.stdout.split()
        out.append((name, float(secs)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[10, 14, 18])
    ap.add_argument("--gates", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    print(f"{'qubits':>6} {'backend':>7} {'run_gates[s]':>13} {'pauli_exp[s]':>13} {'z_parity[s]':>12}")
    rows = bench_kernels(args.qubits, args.gates, args.repeat)
    for n, name, a, b, c in rows:
        print(f"{n:>6} {name:>7} {a:>13.5f} {b:>13.6f} {c:>12.6f}")
    by = {(n, name): a for n, name, a, _, _ in rows}
    for n in args.qubits:
        if (n, "numba") in by:
            print(f"run_gates speed-up at {n} qubits: {by[(n, 'numpy')] / by[(n, 'numba')]:.1f}x")
    if not args.skip_end_to_end:
        print("\nnoisy sampling, dragon, 5 terms x 5000 shots (includes JIT warm-up for numba)")
        for name, secs in bench_end_to_end():
            print(f"  {name:>6}: {secs:.2f}s")


if __name__ == "__main__":
    main()
