"""A full challenge / respond / verify round with three provers.

The verifier publishes circuits; each prover answers with a calibration
file and samples. Only the honest prover, which publishes the calibration it
actually ran, clears the threshold. The withholding prover's device is off by
0.3 rad on every angle but it claims the standard gates, so the verifier's
amplitudes no longer match its samples.

    python3 demos/blind_exchange.py [workdir]
"""
import sys
import tempfile
from pathlib import Path

from rcsverify import blind

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="blind-"))
blind.challenge(work / "challenge", n=12, m=14, count=2, seed=9)
print(f"challenge written to {work / 'challenge'}")

for mode in blind.MODES:
    blind.respond(work / "challenge", work / mode, blind.ProverConfig(mode=mode, N=200_000, seed=1))
    for v in blind.verify(work / "challenge", work / mode):
        verdict = "pass" if v.passed else "FAIL"
        print(f"{mode:9s} {v.name}: F_XEB={v.f_xeb:+.4f} +- {v.std_error:.4f} "
              f"threshold {v.threshold:.4f} -> {verdict}")
