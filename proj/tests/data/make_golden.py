"""Writes golden_tensor.json: a float32 tensor in the service wire format.

Values follow a closed-form rule the C++ test recomputes, plus a few special
bit patterns. numpy does the little-endian packing, independently of the C++
codec.
"""
import base64
import json
import pathlib

import numpy as np

SHAPE = (2, 3, 4, 5)


def values():
    n = int(np.prod(SHAPE))
    i = np.arange(n, dtype=np.int64)
    v = ((i % 17) - 8).astype(np.float32) * np.float32(0.125) + i.astype(np.float32) * np.float32(2.0**-10)
    v[0] = np.float32(-0.0)
    v[1] = np.float32(1e-40)  # subnormal
    v[2] = np.finfo(np.float32).max
    v[3] = np.float32(-1.0 / 3.0)
    return v.reshape(SHAPE)


def main():
    v = values()
    payload = base64.b64encode(v.astype("<f4").tobytes()).decode("ascii")
    out = {"shape": list(SHAPE), "dtype": "float32", "data": payload}
    path = pathlib.Path(__file__).with_name("golden_tensor.json")
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
