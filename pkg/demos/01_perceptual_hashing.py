#!/usr/bin/env python3
"""Fingerprinting images with the 64-bit DCT hash.

The hash lives on the 8x8 low-frequency block of a 32x32 downscale, so it
ignores pixel noise and brightness scaling but moves when content changes.
"""

import numpy as np

from modelmark import phash, synthdata

rng = np.random.default_rng(0)

frames = synthdata.texture_video(3, seed=7, style="skyline").frames
hashes = [phash.phash_image(f) for f in frames]

print("three adjacent video frames:")
for i, h in enumerate(hashes):
    print(f"  frame {i}: {phash.to_hex(h)}")
print(f"adjacent distance 0-1: {phash.hamming(hashes[0], hashes[1])} bits")
print(f"adjacent distance 1-2: {phash.hamming(hashes[1], hashes[2])} bits")

# Robustness: mild pixel noise does not move the hash much
noisy = np.clip(
    frames[0].astype(np.int16) + rng.integers(-6, 7, frames[0].shape), 0, 255
).astype(np.uint8)
print(f"\nafter +/-6 pixel noise: {phash.hamming(hashes[0], phash.phash_image(noisy))} bits moved")

# Brightness scaling is invisible to the hash (real-valued pipeline)
gray = phash.preprocess(frames[0])
assert phash.dct_phash(gray) == phash.dct_phash(0.5 * gray) == phash.dct_phash(2.0 * gray)
print("halving or doubling brightness: 0 bits moved")

# XOR binding: combine a trigger hash with an owner fingerprint hash; either
# component recovers the other, which is what the ownership ledger stores.
owner_fp = synthdata.key_image_class("rings", 1, seed=3)[0]
p1 = hashes[0]
p2 = phash.phash_image(owner_fp)
bound = phash.xor(p1, p2)
print(f"\ntrigger hash      P1 = {phash.to_hex(p1)}")
print(f"fingerprint hash  P2 = {phash.to_hex(p2)}")
print(f"bound value       P  = {phash.to_hex(bound)}")
assert phash.xor(bound, p2) == p1
print("xor(P, P2) recovers P1: ok")
