"""Access-control rules: ordered first-match evaluation, default deny.

A rule row is (subject, api, path pattern, optional item id, action, effect,
priority).  Subjects are a concrete address, the wildcard ``*``, or the
``contacts`` group (subjects whose contact status is accepted).  The node
owner always bypasses evaluation.
"""

from __future__ import annotations

import fnmatch
import itertools
import json
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from blade.crypto import Address
from blade.errors import BladeError, NotFound

SUBJECT_ANY = "*"
SUBJECT_CONTACTS = "contacts"

API_ANY = "*"
API_BASE = "base"

ACTIONS = ("read", "write")
EFFECTS = ("allow", "deny")

_rule_counter = itertools.count(1)


class InvalidRule(BladeError):
    pass


@dataclass
class AclRule:
    subject: str  # address text | "*" | "contacts"
    api_id: str  # address text | "*" | "base"
    path_pattern: str  # glob over the module-relative path
    action: str  # "read" | "write"
    effect: str  # "allow" | "deny"
    priority: int = 100
    item_id: Optional[str] = None  # None matches any item
    rule_id: str = field(default_factory=lambda: f"rule-{next(_rule_counter)}")

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise InvalidRule(f"action must be one of {ACTIONS}, got {self.action!r}")
        if self.effect not in EFFECTS:
            raise InvalidRule(f"effect must be one of {EFFECTS}, got {self.effect!r}")
        if self.subject not in (SUBJECT_ANY, SUBJECT_CONTACTS):
            Address.parse(self.subject)  # raises ValueError on garbage
        if self.api_id not in (API_ANY, API_BASE):
            Address.parse(self.api_id)
        if not isinstance(self.priority, int):
            raise InvalidRule("priority must be an integer")

    def matches(
        self,
        subject: str,
        api_id: str,
        path: str,
        item_id: Optional[str],
        action: str,
        is_contact: Callable[[str], bool],
    ) -> bool:
        if self.action != action:
            return False
        if self.subject == SUBJECT_CONTACTS:
            if not is_contact(subject):
                return False
        elif self.subject != SUBJECT_ANY and self.subject != subject:
            return False
        if self.api_id != API_ANY and self.api_id != api_id:
            return False
        if not fnmatch.fnmatchcase(path, self.path_pattern):
            return False
        if self.item_id is not None and self.item_id != item_id:
            return False
        return True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "AclRule":
        known = {k: raw[k] for k in (
            "subject", "api_id", "path_pattern", "action", "effect",
            "priority", "item_id", "rule_id",
        ) if k in raw}
        return cls(**known)


class AclEngine:
    """Rule store plus the evaluator.  Thread-safe; optionally persisted."""

    def __init__(self, owner: Address, store_path: str | Path | None = None):
        self._owner = owner
        self._rules: list[AclRule] = []
        self._lock = threading.RLock()
        self._store_path = Path(store_path) if store_path else None
        if self._store_path and self._store_path.exists():
            raw = json.loads(self._store_path.read_text())
            self._rules = [AclRule.from_dict(r) for r in raw]

    def _persist(self) -> None:
        if self._store_path is None:
            return
        self._store_path.parent.mkdir(parents=True, exist_ok=True)
        self._store_path.write_text(
            json.dumps([r.to_dict() for r in self._rules], indent=2)
        )

    def add_rule(self, rule: AclRule) -> AclRule:
        with self._lock:
            if any(r.rule_id == rule.rule_id for r in self._rules):
                raise InvalidRule(f"rule id {rule.rule_id} already exists")
            self._rules.append(rule)
            self._persist()
        return rule

    def remove_rule(self, rule_id: str) -> None:
        with self._lock:
            kept = [r for r in self._rules if r.rule_id != rule_id]
            if len(kept) == len(self._rules):
                raise NotFound(f"no rule {rule_id}")
            self._rules = kept
            self._persist()

    def update_rule(self, rule_id: str, **changes) -> AclRule:
        with self._lock:
            for index, rule in enumerate(self._rules):
                if rule.rule_id == rule_id:
                    merged = rule.to_dict()
                    merged.update(changes)
                    merged["rule_id"] = rule_id
                    self._rules[index] = AclRule.from_dict(merged)
                    self._persist()
                    return self._rules[index]
            raise NotFound(f"no rule {rule_id}")

    def list_rules(self) -> list[AclRule]:
        with self._lock:
            return sorted(self._rules, key=lambda r: (r.priority, r.rule_id))

    def replace_rules(self, rules: Iterable[AclRule]) -> None:
        with self._lock:
            self._rules = list(rules)
            self._persist()

    def evaluate(
        self,
        subject: Address | str,
        api_id: str,
        path: str,
        action: str,
        item_id: Optional[str] = None,
        is_contact: Callable[[str], bool] = lambda _: False,
    ) -> bool:
        """True = allow.  Ascending priority, first match wins, default deny;
        the owner identity is always allowed."""
        subject_text = subject.text if isinstance(subject, Address) else subject
        if subject_text == self._owner.text:
            return True
        for rule in self.list_rules():
            if rule.matches(subject_text, api_id, path, item_id, action, is_contact):
                return rule.effect == "allow"
        return False
