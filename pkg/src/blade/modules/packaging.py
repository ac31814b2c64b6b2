"""Installable package format: a zip archive with manifest.json at the root.

Packages are content-addressed: the marketplace record stores keccak256 of
the archive bytes and installation refuses anything that does not match.
Archives are built deterministically (fixed timestamps, sorted entries) so
the same inputs always produce the same bytes and therefore the same hash.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

from blade.crypto import Address, keccak256
from blade.errors import BladeError
from blade.registry.records import InvalidVersion, parse_version

PACKAGE_EXTENSION = ".bpk"
MANIFEST_NAME = "manifest.json"

_FIXED_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


class BadPackage(BladeError):
    """Archive is structurally invalid (not a zip, manifest missing/bad)."""


@dataclass(frozen=True)
class ModuleManifest:
    module_id: Address
    name: str
    version: str
    api_ids: tuple[Address, ...]
    entrypoint: str  # host-interface binding name
    min_protocol: str = "1.0"

    def __post_init__(self):
        parse_version(self.version)

    def to_dict(self) -> dict:
        return {
            "module_id": self.module_id.text,
            "name": self.name,
            "version": self.version,
            "api_ids": [a.text for a in self.api_ids],
            "entrypoint": self.entrypoint,
            "min_protocol": self.min_protocol,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModuleManifest":
        try:
            manifest = cls(
                module_id=Address.parse(raw["module_id"]),
                name=raw["name"],
                version=raw["version"],
                api_ids=tuple(Address.parse(a) for a in raw["api_ids"]),
                entrypoint=raw["entrypoint"],
                min_protocol=raw.get("min_protocol", "1.0"),
            )
        except (KeyError, TypeError, ValueError, InvalidVersion) as exc:
            raise BadPackage(f"invalid manifest: {exc}") from exc
        return manifest


@dataclass
class BladePackage:
    archive: bytes
    manifest: ModuleManifest
    assets: dict = field(default_factory=dict)  # name -> bytes, manifest excluded

    @property
    def package_hash(self) -> bytes:
        return keccak256(self.archive)


def build_package(manifest: ModuleManifest, assets: dict | None = None) -> bytes:
    """Create deterministic archive bytes for a manifest plus assets."""
    entries = {MANIFEST_NAME: json.dumps(manifest.to_dict(), sort_keys=True, indent=2).encode()}
    for name, data in (assets or {}).items():
        if name == MANIFEST_NAME:
            raise BadPackage("assets may not shadow the manifest")
        entries[name] = data

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(entries):
            info = zipfile.ZipInfo(name, date_time=_FIXED_ZIP_TIME)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            archive.writestr(info, entries[name])
    return buffer.getvalue()


def parse_package(archive: bytes) -> BladePackage:
    """Open archive bytes, returning the manifest and the other entries."""
    try:
        with zipfile.ZipFile(io.BytesIO(archive)) as zf:
            names = zf.namelist()
            if MANIFEST_NAME not in names:
                raise BadPackage(f"package has no root {MANIFEST_NAME}")
            manifest_raw = json.loads(zf.read(MANIFEST_NAME))
            assets = {
                name: zf.read(name) for name in names if name != MANIFEST_NAME
            }
    except zipfile.BadZipFile as exc:
        raise BadPackage(f"not a zip archive: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadPackage(f"manifest is not valid JSON: {exc}") from exc
    manifest = ModuleManifest.from_dict(manifest_raw)
    return BladePackage(archive=archive, manifest=manifest, assets=assets)
