"""How PSM picks its boost parameter on a lesion with a pale halo.

B-Otsu splits the blue channel once and keeps only the dark core. PSM sweeps
the high-boost parameter c, tracks the mean of the segmented region and picks
the c whose mean lies closest to a 2-means reference. MAM then keeps the
largest of the PSM, PSMW and PSMB masks.

    python3 demos/psm_walkthrough.py
"""
import numpy as np

from lesionseg.dataset import Phantom, make_phantom
from lesionseg.evaluation import jaccard
from lesionseg.imgcore import extract_channel
from lesionseg.psm import mam_segment, psm_segment, sweep_mean_curve
from lesionseg.segment import segment_b_otsu

img, truth, _ = make_phantom(Phantom(kind="halo_disk", radius=12, halo_width=10, vignette=0.75,
                                     noise_sigma=3, seed=0))
blue = extract_channel(img, "B")

curve = sweep_mean_curve(blue)
print("c      M(c)    area")
for c, m, mask in list(zip(curve.cs, curve.means, curve.masks))[::5]:
    print(f"{c:5.1f}  {m:6.2f}  {mask.sum():5d}")

res = psm_segment(blue)
print(f"\ncandidates {[round(c, 2) for c in res.candidates]}")
print(f"candidate means {np.round(res.candidate_means, 2).tolist()}, 2-means reference {res.reference_mean:.2f}")
print(f"chosen c = {res.chosen_c}")

b = segment_b_otsu(img)
mam = mam_segment(img)
print(f"\n{'method':<8} {'area':>5} {'Jaccard':>8}")
print(f"{'B-Otsu':<8} {b.sum():5d} {jaccard(b, truth):8.4f}")
print(f"{'PSM':<8} {res.mask.sum():5d} {jaccard(res.mask, truth):8.4f}")
print(f"{'MAM':<8} {mam.mask.sum():5d} {jaccard(mam.mask, truth):8.4f}  (winner {mam.winner}, areas {mam.areas})")
print(f"true lesion plus halo: {truth.sum()} px")
