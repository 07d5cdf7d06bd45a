"""Small shared I/O helper."""

import contextlib


def open_for_write(path_or_file):
    """Context manager yielding a writable text stream.

    Paths are opened (and closed) as text files; objects that already
    have a write method are passed through without being closed, so
    writers can target StringIO buffers as well as files.
    """
    if hasattr(path_or_file, "write"):
        return contextlib.nullcontext(path_or_file)
    return open(path_or_file, "w")
