import hashlib

import numpy as np


def fingerprint(*arrays: np.ndarray) -> str:
    """Short SHA-1 digest of array contents, used to key caches and exports."""
    digest = hashlib.sha1()
    for arr in arrays:
        a = np.ascontiguousarray(arr)
        digest.update(str(a.dtype).encode())
        digest.update(str(a.shape).encode())
        digest.update(a.tobytes())
    return digest.hexdigest()[:16]

