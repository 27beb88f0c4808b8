"""Spectral efficiency of use-it-all, one-front and compensate-all against
Eb/N0 for several block sizes, with the three overhead accountings."""

import argparse

from fbmclab.analysis import spectral_efficiency
from fbmclab.core_model import FbmcConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--block-lens", default="5,10,20")
    ap.add_argument("--snr", default="0,5,10,15,20,25,30")
    args = ap.parse_args(argv)
    grid = [float(v) for v in args.snr.split(",")]
    print("scheme,M,ebn0_db,alpha,eta,factor,overhead,se")
    for M in (int(v) for v in args.block_lens.split(",")):
        cfg = FbmcConfig(n_subcarriers=64, block_len=M, overlap=6, n_tx=2, n_rx=2)
        for r in spectral_efficiency(cfg, grid):
            print(f"{r.scheme},{M},{r.ebn0_db:g},{r.alpha},{r.eta:.6g},{r.factor:.6g},{r.overhead:.6g},{r.se:.6g}")


if __name__ == "__main__":
    main()
