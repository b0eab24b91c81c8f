from __future__ import annotations

import math

import pytest

from graftarena.actions import ActionRuntime, catalog
from graftarena.arena import SimConfig
from graftarena.branch import BehaviorBranch, PerceptionView, Pose, new_branch
from graftarena.graft import graft
from graftarena.script import compile_script, parse


def make_view(distance=4.0, tick=0, self_hp=100, opponent_hp=100, facing=0.0,
              opp_facing=math.pi, cooldowns=None, x=0.0, y=0.0) -> PerceptionView:
    """Self at (x, y); opponent straight ahead on the +x axis."""
    return PerceptionView(
        self_pose=Pose(x, y, facing),
        opponent_pose=Pose(x + distance, y, opp_facing),
        self_hp=self_hp,
        opponent_hp=opponent_hp,
        distance=distance,
        tick=tick,
        self_cooldowns=dict(cooldowns or {}),
    )


def fragment_of(text: str):
    return compile_script(parse(text), catalog())


def branch_of(text: str) -> BehaviorBranch:
    """Fresh branch bootstrapped from one script document."""
    branch = new_branch()
    graft(branch, fragment_of(text))
    return branch


@pytest.fixture
def runtime() -> ActionRuntime:
    return ActionRuntime(SimConfig())


@pytest.fixture
def config() -> SimConfig:
    return SimConfig()
