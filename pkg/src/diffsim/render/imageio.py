"""Binary PPM (P6) / PGM (P5) read and write for frames and silhouettes."""

import numpy as np


def _to_u8(img):
    return (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path, rgb):
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(_to_u8(rgb).tobytes())


def write_pgm(path, gray):
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(_to_u8(gray).tobytes())


def _read_header(f):
    fields = []
    while len(fields) < 4:
        line = f.readline()
        if not line:
            raise ValueError("truncated netpbm header")
        line = line.split(b"#")[0]
        fields.extend(line.split())
    return fields


def read_ppm(path):
    """Returns float64 image in [0, 1]; handles P6 and P5."""
    with open(path, "rb") as f:
        magic, w, h, maxval = _read_header(f)
        w, h, maxval = int(w), int(h), int(maxval)
        if magic == b"P6":
            shape = (h, w, 3)
        elif magic == b"P5":
            shape = (h, w)
        else:
            raise ValueError(f"unsupported netpbm magic {magic!r}")
        data = np.frombuffer(f.read(int(np.prod(shape))), dtype=np.uint8)
    return data.reshape(shape).astype(np.float64) / maxval
