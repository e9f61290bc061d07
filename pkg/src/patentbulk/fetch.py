"""Week-to-URL resolution, cached atomic downloads, and archive streaming.

Weekly archives are immutable once published, so the cache keys by file
name; digests recorded in a sidecar index detect local corruption, not
upstream changes.  Downloads land in a temporary file and are renamed
into place only after the zip verifies, so a partial download is never
visible under a final name.
"""

from __future__ import annotations

import datetime as dt
import fcntl
import hashlib
import io
import json
import os
import time
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable, Iterator, Optional, Protocol

from .model import SourceFormat, WeekSpec

DEFAULT_BASE_URL = "https://bulkdata.uspto.gov/data/patent/grant/redbook/fulltext"

# File naming per era, configurable because USPTO has relocated and
# renamed bulk products before.  {issue} is the week's grant Tuesday.
DEFAULT_NAME_TEMPLATES = {
    SourceFormat.APS: "{year}/pftaps{issue:%Y%m%d}_wk{week:02d}.zip",
    SourceFormat.XML2: "{year}/pg{issue:%y%m%d}.zip",
    SourceFormat.XML4: "{year}/ipg{issue:%y%m%d}.zip",
}

_CHUNK_SIZE = 1 << 16


class FetchError(Exception):
    """Download failed; carries the URL and the final HTTP status if any."""

    def __init__(self, url: str, reason: str, status: Optional[int] = None) -> None:
        super().__init__("%s: %s" % (url, reason))
        self.url = url
        self.status = status


class IntegrityError(Exception):
    """Archive bytes on disk are not a readable zip."""


class TransportError(Exception):
    """Network-level failure (DNS, connect, mid-stream drop); retryable."""


@dataclass(frozen=True)
class FetchPlan:
    """Everything needed to locate and cache one weekly file."""

    week: WeekSpec
    format: SourceFormat
    url: str
    cache_path: str
    issue_date: dt.date


@dataclass(frozen=True)
class CacheEntry:
    cache_path: str
    source_url: str
    byte_size: int
    content_digest: str
    retrieved_at: str


class TransportResponse:
    def __init__(self, status: int, chunks: Iterator[bytes]) -> None:
        self.status = status
        self.chunks = chunks


class Transport(Protocol):
    def get(self, url: str) -> TransportResponse: ...


class UrllibTransport:
    """Default HTTP(S) transport; tests inject fakes instead."""

    def __init__(self, timeout: float = 60.0) -> None:
        self.timeout = timeout

    def get(self, url: str) -> TransportResponse:
        try:
            response = urllib.request.urlopen(url, timeout=self.timeout)
        except urllib.error.HTTPError as exc:
            return TransportResponse(exc.code, iter(()))
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise TransportError(str(exc)) from exc

        def chunks() -> Iterator[bytes]:
            try:
                while True:
                    block = response.read(_CHUNK_SIZE)
                    if not block:
                        return
                    yield block
            except OSError as exc:
                raise TransportError(str(exc)) from exc
            finally:
                response.close()

        return TransportResponse(response.status, chunks())


def resolve_plan(
    week: WeekSpec,
    base_url: str = DEFAULT_BASE_URL,
    templates: Optional[dict] = None,
) -> FetchPlan:
    """Pure function from (week, base URL, naming templates) to a plan."""
    issue = week.issue_date()
    format = SourceFormat.for_year(week.year)
    template = (templates or DEFAULT_NAME_TEMPLATES)[format]
    relative = template.format(year=week.year, issue=issue, week=week.week)
    return FetchPlan(
        week=week,
        format=format,
        url=base_url.rstrip("/") + "/" + relative,
        cache_path=relative.rsplit("/", 1)[-1],
        issue_date=issue,
    )


def _meta_path(final: Path) -> Path:
    return final.with_name(final.name + ".meta.json")


def _load_entry(final: Path) -> Optional[CacheEntry]:
    meta = _meta_path(final)
    if not (final.is_file() and meta.is_file()):
        return None
    try:
        data = json.loads(meta.read_text())
        entry = CacheEntry(
            cache_path=str(final),
            source_url=data["source_url"],
            byte_size=int(data["byte_size"]),
            content_digest=data["content_digest"],
            retrieved_at=data["retrieved_at"],
        )
    except (ValueError, KeyError):
        return None
    if final.stat().st_size != entry.byte_size:
        return None
    return entry


def _write_entry(final: Path, entry: CacheEntry) -> None:
    meta = _meta_path(final)
    tmp = meta.with_name(meta.name + ".tmp")
    tmp.write_text(
        json.dumps(
            {
                "source_url": entry.source_url,
                "byte_size": entry.byte_size,
                "content_digest": entry.content_digest,
                "retrieved_at": entry.retrieved_at,
            },
            indent=2,
        )
    )
    os.replace(tmp, meta)


def verify_entry(entry: CacheEntry) -> bool:
    """Recompute the digest of the on-disk bytes; used by tests and repair."""
    digest = hashlib.sha256()
    with open(entry.cache_path, "rb") as handle:
        while True:
            block = handle.read(_CHUNK_SIZE)
            if not block:
                break
            digest.update(block)
    return "sha256:" + digest.hexdigest() == entry.content_digest


def fetch(
    plan: FetchPlan,
    cache_dir: str,
    transport: Optional[Transport] = None,
    retries: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> CacheEntry:
    """Return the week's archive from cache, downloading it first if needed.

    Retries transport errors and 5xx with exponential backoff; a 404 is
    final (a holiday-shifted or missing week, which retrying cannot fix).
    Concurrent fetches of the same week coordinate through a per-entry
    lock so exactly one download occurs.
    """
    directory = Path(cache_dir)
    directory.mkdir(parents=True, exist_ok=True)
    final = directory / plan.cache_path

    entry = _load_entry(final)
    if entry is not None:
        return entry

    lock_path = final.with_name(final.name + ".lock")
    with open(lock_path, "w") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            entry = _load_entry(final)
            if entry is not None:
                return entry
            return _download(plan, final, transport or UrllibTransport(), retries, backoff, sleep)
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)


def _download(
    plan: FetchPlan,
    final: Path,
    transport: Transport,
    retries: int,
    backoff: float,
    sleep: Callable[[float], None],
) -> CacheEntry:
    tmp = final.with_name(final.name + ".tmp-%d" % os.getpid())
    last_status: Optional[int] = None
    last_reason = "no attempts made"
    for attempt in range(retries):
        if attempt:
            sleep(backoff * (2 ** (attempt - 1)))
        try:
            response = transport.get(plan.url)
        except TransportError as exc:
            last_reason = str(exc)
            continue
        if response.status != 200:
            last_status = response.status
            last_reason = "HTTP %d" % response.status
            if 500 <= response.status < 600:
                continue
            raise FetchError(plan.url, last_reason, status=response.status)

        digest = hashlib.sha256()
        size = 0
        try:
            with open(tmp, "wb") as out:
                for block in response.chunks:
                    out.write(block)
                    digest.update(block)
                    size += len(block)
        except TransportError as exc:
            tmp.unlink(missing_ok=True)
            last_reason = str(exc)
            continue
        except BaseException:
            tmp.unlink(missing_ok=True)
            raise

        try:
            with zipfile.ZipFile(tmp) as archive:
                bad = archive.testzip()
            if bad is not None:
                raise zipfile.BadZipFile("bad CRC for member %r" % bad)
        except (zipfile.BadZipFile, OSError) as exc:
            tmp.unlink(missing_ok=True)
            raise IntegrityError("%s: %s" % (plan.url, exc)) from exc

        entry = CacheEntry(
            cache_path=str(final),
            source_url=plan.url,
            byte_size=size,
            content_digest="sha256:" + digest.hexdigest(),
            retrieved_at=dt.datetime.now(dt.timezone.utc).isoformat(),
        )
        os.replace(tmp, final)
        _write_entry(final, entry)
        return entry
    raise FetchError(
        plan.url, "giving up after %d attempts: %s" % (retries, last_reason),
        status=last_status,
    )


class _ConcatenatedMembers(io.RawIOBase):
    """Stream every archive member in order as one logical byte stream."""

    def __init__(self, archive: zipfile.ZipFile, members: list[zipfile.ZipInfo]) -> None:
        self._archive = archive
        self._members = members
        self._index = 0
        self._current: Optional[BinaryIO] = None

    def readable(self) -> bool:
        return True

    def readinto(self, buffer) -> int:
        while True:
            if self._current is None:
                if self._index >= len(self._members):
                    return 0
                self._current = self._archive.open(self._members[self._index])
                self._index += 1
            chunk = self._current.read(len(buffer))
            if chunk:
                buffer[: len(chunk)] = chunk
                return len(chunk)
            self._current.close()
            self._current = None

    def close(self) -> None:
        if self._current is not None:
            self._current.close()
        self._archive.close()
        super().close()


def open_archive(entry: CacheEntry) -> io.BufferedReader:
    """Stream the archive's data members, in member order, without
    materializing the decompressed file."""
    try:
        archive = zipfile.ZipFile(entry.cache_path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise IntegrityError("%s: %s" % (entry.cache_path, exc)) from exc
    members = [info for info in archive.infolist() if not info.is_dir()]
    for info in members:
        if info.flag_bits & 0x1:
            archive.close()
            raise IntegrityError("%s: member %r is encrypted" % (entry.cache_path, info.filename))
    return io.BufferedReader(_ConcatenatedMembers(archive, members), buffer_size=_CHUNK_SIZE)


def archive_sizes(entry: CacheEntry) -> tuple[int, int]:
    """(compressed, decompressed) byte sizes from the zip directory."""
    with zipfile.ZipFile(entry.cache_path) as archive:
        decompressed = sum(i.file_size for i in archive.infolist() if not i.is_dir())
    return entry.byte_size, decompressed
