#!/usr/bin/env python3
"""Bridge test double: tiles thresholded latent values onto the output grid.

Each latent cell covers a 16^3 block; its label is 0 below -1, 2 above 1 and
1 otherwise. Exits 3 without writing a volume if z.txt is malformed.
"""
import sys
from pathlib import Path


def main(job: Path) -> int:
    try:
        lines = [ln.strip() for ln in (job / "z.txt").read_text().splitlines() if ln.strip()]
        if not lines or not lines[-1].startswith("dims="):
            raise ValueError("missing dims line")
        nx, ny, nz = (int(v) for v in lines[-1][5:].split(","))
        z = [float(v) for v in lines[:-1]]
        lx, ly, lz = nx // 16, ny // 16, nz // 16
        if len(z) != lx * ly * lz:
            raise ValueError("latent length does not match dims")
    except (OSError, ValueError) as exc:
        print(f"malformed z.txt: {exc}", file=sys.stderr)
        return 3

    def label(v: float) -> int:
        return 0 if v < -1.0 else (2 if v > 1.0 else 1)

    out = bytearray(nx * ny * nz)
    i = 0
    for k in range(nz):
        for j in range(ny):
            row = (k // 16) * ly * lx + (j // 16) * lx
            for x in range(nx):
                out[i] = label(z[row + x // 16])
                i += 1
    (job / "volume.raw").write_bytes(bytes(out))
    (job / "volume.hdr").write_text(
        f"nx={nx}\nny={ny}\nnz={nz}\nvoxel_size_um=0.4\nphase_coding=pore:0,nmc:1,cbd:2\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[-1])))
