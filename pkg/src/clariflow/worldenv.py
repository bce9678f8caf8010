"""Venue/travel databases, the domain API surface, and booking-reference issuance."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from .core import API_TABLE, RECORD_SCHEMA, Domain, SlotValue

log = logging.getLogger(__name__)

REFERENCE_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"

# identity attribute used for uniqueness and result ordering
IDENTITY_ATTR = {d: ("trainID" if d is Domain.TRAIN else "name") for d in Domain}
IDENTITY_ATTR[Domain.TAXI] = "car"

# alternate spellings seen in upstream DB dumps, normalized at load
_ATTR_ALIASES = {"entrance fee": "entrancefee", "trainId": "trainID", "trainid": "trainID"}


class WorldError(Exception):
    """Base for world-environment failures."""


class SchemaError(WorldError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class UnknownSlot(WorldError):
    def __init__(self, domain: Domain, slot: str):
        super().__init__(f"slot {slot!r} not accepted by {domain.value} APIs")
        self.domain = domain
        self.slot = slot


class NotFound(WorldError):
    pass


class AmbiguousEntity(NotFound):
    """Constraints match several records; the caller should disambiguate with the user."""


class MissingSlot(WorldError):
    def __init__(self, slot: str):
        super().__init__(f"required slot {slot!r} has no usable value")
        self.slot = slot


class ConflictingArgs(WorldError):
    pass


@dataclass(frozen=True)
class VenueRecord:
    domain: Domain
    attributes: dict[str, str]

    @property
    def identity(self) -> str:
        return self.attributes[IDENTITY_ATTR[self.domain]]


@dataclass(frozen=True)
class ApiSchema:
    name: str
    domain: Domain
    arguments: tuple[str, ...]
    kind: str  # "query" | "book"


API_SCHEMAS: dict[str, ApiSchema] = {
    name: ApiSchema(name, dom, args, kind) for name, (dom, args, kind) in API_TABLE.items()
}


def api_schema(name: str) -> ApiSchema:
    return API_SCHEMAS[name]


@dataclass(frozen=True)
class BookingRecord:
    reference: str
    api_name: str
    args: dict[str, SlotValue]
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "api_name": self.api_name,
            "args": {k: v.raw() for k, v in self.args.items()},
            "timestamp": self.timestamp,
        }


class WorldDatabase:
    """Read-only per-domain record store; safe to share across dialogues after load."""

    def __init__(self, records: dict[Domain, list[VenueRecord]]):
        self.records = {d: list(records.get(d, [])) for d in Domain}
        self._by_identity: dict[Domain, dict[str, VenueRecord]] = {}
        for domain, recs in self.records.items():
            index: dict[str, VenueRecord] = {}
            for rec in recs:
                index[rec.identity.strip().lower()] = rec
            self._by_identity[domain] = index

    def counts(self) -> dict[str, int]:
        return {d.value: len(recs) for d, recs in self.records.items()}

    def find(self, domain: Domain, identity: str) -> Optional[VenueRecord]:
        return self._by_identity[domain].get(identity.strip().lower())


def _normalize_row(domain: Domain, row_index: int, raw: dict) -> VenueRecord:
    if not isinstance(raw, dict):
        raise SchemaError(row_index, "record is not an object")
    schema = set(RECORD_SCHEMA[domain])
    attributes: dict[str, str] = {}
    for key, value in raw.items():
        key = _ATTR_ALIASES.get(key, key)
        if key not in schema:
            continue  # upstream dumps carry extra fields; keep only the schema
        if isinstance(value, (dict, list)):
            log.debug("dropping non-scalar attribute %s.%s at row %d", domain.value, key, row_index)
            continue
        attributes[key] = str(value)
    identity_attr = IDENTITY_ATTR[domain]
    if identity_attr not in attributes or not attributes[identity_attr].strip():
        raise SchemaError(row_index, f"missing {identity_attr}")
    return VenueRecord(domain, attributes)


def load_database(path: str) -> WorldDatabase:
    """Load per-domain JSON array files (<domain>_db.json) from a directory."""
    records: dict[Domain, list[VenueRecord]] = {}
    for domain in Domain:
        file_path = os.path.join(path, f"{domain.value}_db.json")
        if not os.path.exists(file_path):
            records[domain] = []
            continue
        with open(file_path, encoding="utf-8") as fh:
            rows = json.load(fh)
        if not isinstance(rows, list):
            raise SchemaError(0, f"{domain.value} database must be a JSON array")
        seen: set[str] = set()
        domain_records = []
        for i, row in enumerate(rows):
            record = _normalize_row(domain, i, row)
            key = record.identity.strip().lower()
            if key in seen:
                raise SchemaError(i, f"duplicate {IDENTITY_ATTR[domain]}: {record.identity!r}")
            seen.add(key)
            domain_records.append(record)
        records[domain] = domain_records
    db = WorldDatabase(records)
    log.info("loaded world database: %s", db.counts())
    return db


def _matches(record: VenueRecord, constraints: dict[str, SlotValue]) -> bool:
    for slot, want in constraints.items():
        if not want.is_value:
            continue  # dontcare and any match unconditionally
        have = record.attributes.get(slot)
        if have is None or have.strip().lower() != want.text.strip().lower():
            return False
    return True


def query_venues(db: WorldDatabase, api: ApiSchema, constraints: dict[str, SlotValue]) -> list[VenueRecord]:
    """All records of the API's domain matching every constraint, ordered by identity."""
    if api.kind != "query":
        raise ValueError(f"{api.name} is not a query API")
    for slot in constraints:
        if slot not in api.arguments:
            raise UnknownSlot(api.domain, slot)
    hits = [r for r in db.records[api.domain] if _matches(r, constraints)]
    hits.sort(key=lambda r: r.identity.strip().lower())
    return hits


def generate_reference(rng: random.Random) -> str:
    """One 8-character uppercase alphanumeric reference draw."""
    return "".join(rng.choice(REFERENCE_ALPHABET) for _ in range(8))


class BookingLedger:
    """Append-only per-run booking log; reference issuance is seeded and collision-free."""

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self._issued: set[str] = set()
        self.bookings: list[BookingRecord] = []

    def next_reference(self) -> str:
        with self._lock:
            while True:
                ref = generate_reference(self._rng)
                if ref not in self._issued:
                    self._issued.add(ref)
                    return ref

    def record(self, api_name: str, args: dict[str, SlotValue]) -> BookingRecord:
        booking = BookingRecord(self.next_reference(), api_name, dict(args), time.time())
        with self._lock:
            self.bookings.append(booking)
        return booking

    def to_jsonl(self) -> str:
        return "".join(json.dumps(b.to_dict(), sort_keys=True) + "\n" for b in self.bookings)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def _require_value(args: dict[str, SlotValue], slot: str) -> str:
    value = args.get(slot)
    if value is None or not value.is_value:
        raise MissingSlot(slot)
    return value.text


def _check_against_record(record: VenueRecord, args: dict[str, SlotValue]) -> None:
    # a concrete arg that is also a record attribute must agree with the record
    for slot, value in args.items():
        if not value.is_value:
            continue
        have = record.attributes.get(slot)
        if have is not None and have.strip().lower() != value.text.strip().lower():
            raise ConflictingArgs(f"{slot}={value.text!r} conflicts with {record.identity!r} ({have})")


def execute_booking(
    db: WorldDatabase, api: ApiSchema, args: dict[str, SlotValue], ledger: BookingLedger
) -> BookingRecord:
    """Validate identity and argument consistency, then issue a fresh booking reference."""
    if api.kind != "book":
        raise ValueError(f"{api.name} is not a booking API")
    for slot in args:
        if slot not in api.arguments:
            raise UnknownSlot(api.domain, slot)

    if api.domain is Domain.TAXI:
        departure = _require_value(args, "departure")
        destination = _require_value(args, "destination")
        if departure.strip().lower() == destination.strip().lower():
            raise ConflictingArgs("departure and destination are the same place")
        return ledger.record(api.name, args)

    if api.domain is Domain.TRAIN:
        train_id = args.get("trainID")
        if train_id is not None and train_id.is_value:
            record = db.find(Domain.TRAIN, train_id.text)
            if record is None:
                raise NotFound(f"no train {train_id.text!r}")
            _check_against_record(record, args)
            return ledger.record(api.name, args)
        # no trainID: the remaining concrete constraints must single out one train
        constraints = {
            s: v for s, v in args.items() if s in RECORD_SCHEMA[Domain.TRAIN] and v.is_value
        }
        if not constraints:
            raise MissingSlot("trainID")
        hits = [r for r in db.records[Domain.TRAIN] if _matches(r, constraints)]
        if not hits:
            raise NotFound("no train matches the given constraints")
        if len(hits) > 1:
            raise AmbiguousEntity(f"{len(hits)} trains match; need trainID or tighter constraints")
        bound = dict(args)
        bound["trainID"] = SlotValue.value(hits[0].identity)
        return ledger.record(api.name, bound)

    # restaurant / hotel: booked by name
    name = _require_value(args, "name")
    record = db.find(api.domain, name)
    if record is None:
        raise NotFound(f"no {api.domain.value} named {name!r}")
    _check_against_record(record, args)
    return ledger.record(api.name, args)
