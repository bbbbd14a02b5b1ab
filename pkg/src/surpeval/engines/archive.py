"""Weight archive files: a textual tensor manifest plus raw f32 payload.

Layout: 8-byte magic ``SBWT0001``, 8-byte little-endian header length,
UTF-8 header with one ``name<TAB>dim,dim,...<TAB>offset`` line per
tensor (offsets are byte positions into the payload), then the payload
of little-endian float32 tensors in header order.
"""

import numpy as np

MAGIC = b"SBWT0001"


class ArchiveError(ValueError):
    pass


def save_archive(path, tensors: dict[str, np.ndarray]) -> None:
    lines = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        if "\t" in name or "\n" in name:
            raise ArchiveError(f"illegal tensor name {name!r}")
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        dims = ",".join(str(s) for s in arr.shape)
        lines.append(f"{name}\t{dims}\t{offset}")
        blobs.append(blob)
        offset += len(blob)
    header = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_manifest(path) -> list[tuple[str, tuple[int, ...], int]]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ArchiveError(f"bad magic {magic!r}")
        hlen = int.from_bytes(fh.read(8), "little")
        header = fh.read(hlen).decode("utf-8")
    entries = []
    for line in header.splitlines():
        if not line:
            continue
        name, dims, offset = line.split("\t")
        shape = tuple(int(s) for s in dims.split(",")) if dims else ()
        entries.append((name, shape, int(offset)))
    return entries


def load_archive(path) -> dict[str, np.ndarray]:
    entries = read_manifest(path)
    with open(path, "rb") as fh:
        fh.seek(8)
        hlen = int.from_bytes(fh.read(8), "little")
        fh.seek(16 + hlen)
        payload = fh.read()
    tensors: dict[str, np.ndarray] = {}
    for name, shape, offset in entries:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(payload):
            raise ArchiveError(f"tensor {name} extends past end of payload")
        tensors[name] = np.frombuffer(
            payload[offset:end], dtype="<f4").reshape(shape)
    return tensors
