"""IaaS-for-Robots node: repository, backends and the request pipeline."""

from .backends import OverlayBackend, PresenceBackend
from .model import PAAS, PEER_IAAS, ServiceRequest, SubTask, TaskAssignment, TaskSpec
from .node import IaaSNode, task_commands
from .repository import RobotsRepository
