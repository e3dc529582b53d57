"""Goal reachability for BPEL workflows under RBAC4BPEL authorization policies."""

__version__ = "0.1.0"
