"""
Run manifest: what was run, on which inputs, producing which outputs
"""

import hashlib
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from services.report_generator import write_json
from src.utils.config import TOOL_VERSION


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


@dataclass
class RunManifest:
    argv: List[str]
    tool_version: str = TOOL_VERSION
    seed: Optional[int] = None
    input_digests: Dict[str, str] = field(default_factory=dict)
    output_digests: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None

    @classmethod
    def start(cls, argv: Optional[List[str]] = None, seed: Optional[int] = None) -> 'RunManifest':
        return cls(argv=list(sys.argv[1:] if argv is None else argv), seed=seed)

    def add_input(self, path):
        if path is not None and Path(path).exists():
            self.input_digests[str(path)] = file_digest(path)

    def add_output(self, path):
        self.output_digests[Path(path).name] = file_digest(path)

    def finish(self, out_dir) -> Path:
        self.finished_at = _now()
        return write_json(asdict(self), Path(out_dir) / 'manifest.json')
