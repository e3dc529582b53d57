"""RBAC4BPEL policies: users, roles, permissions, hierarchy and authorization constraints."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Union

from ..errors import HierarchyNotAntisymmetric, PolicyError, UndeclaredConstant
from .logic import ACTION, PERMISSION, ROLE, USER

USER_DOMAIN, ROLE_DOMAIN = "user", "role"
REL_NE, REL_EQ, REL_PREC = "!=", "=", "<"


@dataclass(frozen=True)
class AuthConstraint:
    """``<D, (t1, t2), rho>``: whoever performs ``t2`` must relate by ``rho`` to a performer of ``t1``.

    ``relation`` is ``"!="`` (separation of duty), ``"="`` (binding of
    duty), ``"<"`` (strictly senior role; role domain only) or an explicit
    frozenset of ``(a, b)`` pairs.  ``domain=None`` means the whole sort.
    """
    domain_kind: str
    t1: str
    t2: str
    relation: Union[str, frozenset]
    domain: Optional[frozenset] = None

    def __post_init__(self):
        if self.domain_kind not in (USER_DOMAIN, ROLE_DOMAIN):
            raise PolicyError(f"domain_kind must be 'user' or 'role', not {self.domain_kind!r}")
        if isinstance(self.relation, str):
            if self.relation not in (REL_NE, REL_EQ, REL_PREC):
                raise PolicyError(f"unknown relation {self.relation!r}")
            if self.relation == REL_PREC and self.domain_kind != ROLE_DOMAIN:
                raise PolicyError("the seniority relation '<' needs a role domain")
        else:
            object.__setattr__(self, "relation", frozenset(tuple(p) for p in self.relation))
        if self.domain is not None:
            object.__setattr__(self, "domain", frozenset(self.domain))

    def relates(self, a: str, b: str, policy: "RbacPolicy") -> bool:
        """Does ``(a, b)`` belong to the constraint relation (domain restriction included)?"""
        if self.domain is not None and not (a in self.domain and b in self.domain):
            return True
        if self.relation == REL_NE:
            return a != b
        if self.relation == REL_EQ:
            return a == b
        if self.relation == REL_PREC:
            return a != b and (b, a) in policy.senior
        return (a, b) in self.relation

    def to_dict(self) -> dict:
        rel = self.relation if isinstance(self.relation, str) else sorted(map(list, self.relation))
        doc = {"domain_kind": self.domain_kind, "t1": self.t1, "t2": self.t2, "relation": rel}
        if self.domain is not None:
            doc["domain"] = sorted(self.domain)
        return doc


@dataclass(frozen=True)
class RbacPolicy:
    users: tuple
    roles: tuple
    permissions: tuple
    actions: tuple
    ua: frozenset
    pa: frozenset
    hierarchy: frozenset = frozenset()
    perm_of_action: dict = field(default_factory=dict)
    constraints: tuple = ()

    def __post_init__(self):
        for name in ("users", "roles", "permissions", "actions", "constraints"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("ua", "pa", "hierarchy"):
            object.__setattr__(self, name, frozenset(tuple(p) for p in getattr(self, name)))
        object.__setattr__(self, "perm_of_action", dict(self.perm_of_action))
        for name in ("users", "roles", "permissions", "actions"):
            vals = getattr(self, name)
            if len(set(vals)) != len(vals):
                raise PolicyError(f"duplicate entry in {name}")
        if not self.users:
            raise PolicyError("a policy needs at least one user")
        self._check_declared()
        self.senior  # computes the closure, raising on cycles

    def _check_declared(self):
        decl = {USER: set(self.users), ROLE: set(self.roles),
                PERMISSION: set(self.permissions), ACTION: set(self.actions)}

        def need(name, sort):
            if name not in decl[sort]:
                raise UndeclaredConstant(name, sort)

        for u, r in self.ua:
            need(u, USER), need(r, ROLE)
        for r, p in self.pa:
            need(r, ROLE), need(p, PERMISSION)
        for a, b in self.hierarchy:
            need(a, ROLE), need(b, ROLE)
        for a, p in self.perm_of_action.items():
            need(a, ACTION), need(p, PERMISSION)
        for c in self.constraints:
            need(c.t1, ACTION), need(c.t2, ACTION)
            sort = USER if c.domain_kind == USER_DOMAIN else ROLE
            for d in c.domain or ():
                need(d, sort)
            if not isinstance(c.relation, str):
                for a, b in c.relation:
                    need(a, sort), need(b, sort)

    def constants(self, sort: str) -> tuple:
        return {USER: self.users, ROLE: self.roles, PERMISSION: self.permissions,
                ACTION: self.actions}[sort]

    @cached_property
    def senior(self) -> frozenset:
        """Reflexive-transitive closure of the hierarchy: ``(a, b)`` means ``a >= b``."""
        succ = {r: {r} for r in self.roles}
        for a, b in self.hierarchy:
            succ[a].add(b)
        changed = True
        while changed:
            changed = False
            for r in self.roles:
                new = set().union(*(succ[s] for s in succ[r]))
                if new != succ[r]:
                    succ[r] = new
                    changed = True
        for a in self.roles:
            for b in succ[a]:
                if a != b and a in succ[b]:
                    raise HierarchyNotAntisymmetric(_cycle(self.hierarchy, a, b))
        return frozenset((a, b) for a in self.roles for b in succ[a])

    @cached_property
    def roles_of(self) -> dict:
        out = {u: [] for u in self.users}
        for u, r in sorted(self.ua, key=lambda p: self.roles.index(p[1])):
            out[u].append(r)
        return out

    def can_get(self, user: str, permission: str) -> bool:
        """Explicit or implicit (through the hierarchy) membership in a role holding ``permission``."""
        return any((r2, r) in self.senior and (r, permission) in self.pa
                   for r2 in self.roles_of.get(user, ()) for r in self.roles)

    def relation(self, name: str) -> frozenset:
        return {"ua": self.ua, "pa": self.pa, "geq": self.senior}[name]

    def without_users(self, users) -> "RbacPolicy":
        drop = set(users)
        cons = []
        for c in self.constraints:
            if c.domain_kind == USER_DOMAIN and c.domain is not None:
                c = replace(c, domain=c.domain - drop)
            if c.domain_kind == USER_DOMAIN and not isinstance(c.relation, str):
                c = replace(c, relation=frozenset(p for p in c.relation if not drop & set(p)))
            cons.append(c)
        return replace(self, users=tuple(u for u in self.users if u not in drop),
                       ua=frozenset(p for p in self.ua if p[0] not in drop),
                       constraints=tuple(cons))

    def with_actions(self, extra) -> "RbacPolicy":
        new = tuple(a for a in dict.fromkeys(extra) if a not in self.actions)
        return replace(self, actions=self.actions + new) if new else self

    def to_dict(self) -> dict:
        return {
            "users": list(self.users),
            "roles": list(self.roles),
            "permissions": list(self.permissions),
            "actions": list(self.actions),
            "ua": sorted(map(list, self.ua)),
            "pa": sorted(map(list, self.pa)),
            "hierarchy": sorted(map(list, self.hierarchy)),
            "perm_of_action": dict(sorted(self.perm_of_action.items())),
            "constraints": [c.to_dict() for c in self.constraints],
        }


def _cycle(hierarchy, a, b):
    # shortest a ->* b ->* a witness in the generating relation, for the error message
    edges = {}
    for x, y in hierarchy:
        edges.setdefault(x, []).append(y)

    def path(src, dst):
        prev, queue = {src: None}, [src]
        for n in queue:
            for m in edges.get(n, ()):
                if m not in prev:
                    prev[m] = n
                    queue.append(m)
        out, n = [], dst
        while n is not None:
            out.append(n)
            n = prev[n]
        return out[::-1]

    return path(a, b) + path(b, a)[1:]


def constraint_from_dict(doc: dict) -> AuthConstraint:
    try:
        rel = doc["relation"]
        kind = doc.get("domain_kind", USER_DOMAIN)
        kind = {"U": USER_DOMAIN, "R": ROLE_DOMAIN}.get(kind, kind)
        rel = {"≠": REL_NE, "≺": REL_PREC, "prec": REL_PREC, "==": REL_EQ}.get(rel, rel) \
            if isinstance(rel, str) else frozenset(map(tuple, rel))
        dom = doc.get("domain")
        return AuthConstraint(kind, doc["t1"], doc["t2"], rel,
                              None if dom is None else frozenset(dom))
    except KeyError as exc:
        raise PolicyError(f"constraint is missing {exc}") from exc


def load_policy(doc: Union[dict, str]) -> RbacPolicy:
    """Build a policy from its JSON document (a dict or JSON text)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise PolicyError(f"invalid JSON: {exc}") from exc
    try:
        return RbacPolicy(
            users=doc["users"], roles=doc["roles"],
            permissions=doc.get("permissions", []), actions=doc.get("actions", []),
            ua=doc.get("ua", []), pa=doc.get("pa", []),
            hierarchy=doc.get("hierarchy", []),
            perm_of_action=doc.get("perm_of_action", {}),
            constraints=[constraint_from_dict(c) for c in doc.get("constraints", [])],
        )
    except KeyError as exc:
        raise PolicyError(f"policy is missing {exc}") from exc


def dumps_policy(policy: RbacPolicy) -> str:
    return json.dumps(policy.to_dict(), indent=2) + "\n"
