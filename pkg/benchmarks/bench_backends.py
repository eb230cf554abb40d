"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in a fresh interpreter so the ``PHASEDBS_NO_NUMBA`` flag
takes effect exactly as it would for a user; outputs are hashed to show the
two paths agree bit for bit.

    python benchmarks/bench_backends.py [--seconds 10] [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
import numpy as np
from phasedbs import kernels
from phasedbs.experiments import throughput_config, closed_loop_for
from phasedbs.phase import default_luts, sweep_grid
from phasedbs.signals import afe_digitize, gen_sine_pink

seconds, repeats = float(sys.argv[1]), int(sys.argv[2])

def best(fn):
    fn()
    t = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter(); fn(); t = min(t, time.perf_counter() - t0)
    return t

luts = default_luts()
re, im = sweep_grid(10)
fir_taps = np.arange(-16, 17, dtype=np.int64) * 512
x = np.random.default_rng(0).integers(-512, 512, 400_000)
xpad = np.concatenate([np.zeros(32, np.int64), x])

cfg = throughput_config(0)
rate = cfg.frontend.per_channel_rate_hz
sig = gen_sine_pink(2e-3, 6.0, 0.5e-3, seconds, rate, seed=0)
codes = afe_digitize([sig] * cfg.frontend.n_channels, cfg.frontend)
loop = closed_loop_for(cfg)
result = loop.run(codes)

timings = {
    "lpe_phase_per_s": re.size / best(lambda: kernels.lpe_phase(re, im, luts.recip, luts.lin)),
    "fir_q15_outputs_per_s": 100_000 / best(lambda: kernels.fir_q15(xpad, fir_taps, 0, 4, 100_000)),
    "closed_loop_x_realtime": seconds / best(lambda: loop.run(codes)),
}
digest = hashlib.sha256(result.phases.tobytes() + result.bandpass.tobytes()
                        + repr([(e.t_index, e.mode) for e in result.events]).encode()).hexdigest()
print(json.dumps({"backend": kernels.BACKEND, "timings": timings, "output_sha256": digest}))
"""


def run_backend(no_numba, seconds, repeats):
    env = dict(os.environ, PHASEDBS_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(seconds), str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=10.0, help="signal length for the closed loop")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rows = [run_backend(False, args.seconds, args.repeats), run_backend(True, args.seconds, args.repeats)]
    keys = list(rows[0]["timings"])
    print(f"{'backend':8s}" + "".join(f"{k:>26s}" for k in keys))
    for r in rows:
        print(f"{r['backend']:8s}" + "".join(f"{r['timings'][k]:26.4g}" for k in keys))
    speedup = {k: rows[0]["timings"][k] / rows[1]["timings"][k] for k in keys}
    print(f"{'speedup':8s}" + "".join(f"{speedup[k]:25.2f}x" for k in keys))
    same = rows[0]["output_sha256"] == rows[1]["output_sha256"]
    print("closed-loop outputs identical across backends:", same)
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
