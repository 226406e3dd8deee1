from pathlib import Path
from typing import Union


def prepare_output_path(path: Union[str, Path]) -> Path:
    """ Create parent directories of an output file and return it as `Path`.
    """

    path = Path(path)
    if path.exists() and path.is_dir():
        raise IsADirectoryError(f"{str(path)} is a directory!")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
