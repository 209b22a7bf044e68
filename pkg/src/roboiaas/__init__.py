"""Federated infrastructure-as-a-service for heterogeneous robots.

Subpackages and modules:

* :mod:`roboiaas.descriptor` - robot description model and codec
* :mod:`roboiaas.marketplace` - presence-based robots services marketplace
* :mod:`roboiaas.iaas` - IaaS node (repository, discovery, coalitions, delegation)
* :mod:`roboiaas.gateway` - robot gateways and simulated robots
* :mod:`roboiaas.overlay` - peer-to-peer overlay baseline
* :mod:`roboiaas.bench` - scenarios, measurements and the ``bench`` CLI
"""

__version__ = "0.1.0"
