"""Attribute universe bookkeeping and the untrusted record store."""

from __future__ import annotations

from typing import Iterable, Mapping

from ..abe import AbeCiphertext, GroupElementGT

# Seeded attribute universe: six categories covering energy source, consumer
# type, location, appliance priority, load class and user profession.
DEFAULT_UNIVERSE: dict[str, tuple[str, ...]] = {
    "source": ("source:fossil", "source:solar", "source:hydro", "source:wind"),
    "consumer": ("consumer:individual", "consumer:corporate", "consumer:phev"),
    "location": ("location:city", "location:region"),
    "appliance": ("appliance:essential", "appliance:deferrable"),
    "load": ("load:high", "load:low"),
    "user": ("user:electrical_engineer", "user:power_engineer",
             "user:environmentalist", "user:policy_maker"),
}


class AttributeRegistry:
    """The universe W plus the attribute-to-authority ownership partition."""

    def __init__(self, universe: Iterable[str] | None = None):
        if universe is None:
            universe = [a for group in DEFAULT_UNIVERSE.values() for a in group]
        self._universe: dict[str, str | None] = {a: None for a in universe}

    @property
    def universe(self) -> list[str]:
        return list(self._universe)

    @property
    def w(self) -> int:
        return len(self._universe)

    def add_attributes(self, attributes: Iterable[str]) -> None:
        for attribute in attributes:
            self._universe.setdefault(attribute, None)

    def assign(self, kdc_id: str, attributes: Iterable[str]) -> None:
        """Claim attributes for one authority; ownership must stay a partition."""
        attributes = list(attributes)
        for attribute in attributes:
            owner = self._universe.get(attribute)
            if owner is not None and owner != kdc_id:
                raise ValueError(
                    f"attribute {attribute!r} already owned by {owner!r}")
        for attribute in attributes:
            self._universe[attribute] = kdc_id

    def owner(self, attribute: str) -> str | None:
        return self._universe.get(attribute)

    def attributes_of(self, kdc_id: str) -> list[str]:
        return [a for a, owner in self._universe.items() if owner == kdc_id]

    def __contains__(self, attribute: str) -> bool:
        return attribute in self._universe


class Repository:
    """Honest-but-curious record store.

    Holds ciphertexts and the per-user out-of-band row-update deliveries.
    Nothing here accepts key material; reads are free, writes append, and
    only the revocation path may replace a stored record.
    """

    def __init__(self):
        self._records: dict[str, AbeCiphertext] = {}
        self._deliveries: dict[tuple[str, str], dict[int, GroupElementGT]] = {}

    def store(self, record_id: str, ciphertext: AbeCiphertext) -> None:
        if record_id in self._records:
            raise ValueError(f"record {record_id!r} already stored")
        self._records[record_id] = ciphertext

    def get(self, record_id: str) -> AbeCiphertext:
        return self._records[record_id]

    def record_ids(self) -> list[str]:
        return list(self._records)

    def apply_revocation(self, record_id: str, ciphertext: AbeCiphertext) -> None:
        if record_id not in self._records:
            raise KeyError(f"record {record_id!r} not stored")
        self._records[record_id] = ciphertext

    def deliver_updates(self, record_id: str, user_id: str,
                        updates: Mapping[int, GroupElementGT]) -> None:
        held = self._deliveries.setdefault((record_id, user_id), {})
        held.update(updates)

    def updates_for(self, record_id: str, user_id: str) -> dict[int, GroupElementGT]:
        return dict(self._deliveries.get((record_id, user_id), {}))
