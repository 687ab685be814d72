"""Python bindings for the vspfreg registration library."""

import json

from ._core import (  # noqa: F401
    Error,
    InvalidArgument,
    IoError,
    Volume,
    load_volume,
    make_phantom_pair as _make_phantom_pair,
    nmi,
    register_volumes_json,
    run_cli,
    save_volume,
    solve_vspf,
    tre,
)


def register_volumes(ref, mov, config=None):
    """Registers mov to ref. `config` is a dict in the CLI's JSON config format."""
    out = register_volumes_json(ref, mov, json.dumps(config) if config else "")
    return json.loads(out)


def make_phantom_pair(seed, spec=None):
    return _make_phantom_pair(seed, json.dumps(spec) if spec else "")
