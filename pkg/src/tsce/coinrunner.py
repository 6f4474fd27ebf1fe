"""CoinRunner: a small deterministic grid game with scripted agents.

Frame convention: frame ``t`` holds the score and sprite flags of the state
*before* action ``t`` together with what that action did (which sprite it
targeted, which sprite cell it entered). The consequences of a collision
(score change, removal, termination) therefore show up in frame ``t + 1``.
A rollout ends with one extra frame for the final state, carrying no action.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from itertools import permutations
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, GameError

FORMAT_VERSION = 1

ACTIONS = {
    "up": (0, 1),
    "down": (0, -1),
    "left": (-1, 0),
    "right": (1, 0),
    "stay": (0, 0),
}
ACTION_NAMES = tuple(ACTIONS)
SPRITES = ("enemy", "goal", "goldcoin", "powerup")
BEHAVIOURS = ("killer", "coincollector", "optimal", "random")

BINARY_FEATURES = (
    "targeting_enemy",
    "targeting_goal",
    "targeting_goldcoin",
    "targeting_powerup",
    "collide_enemy",
    "collide_goal",
    "collide_goldcoin",
    "collide_powerup",
    "enemy_exists",
    "powerup_exists",
    "goldcoin_exists",
    "powerup_collected",
    "enemy_killed",
    "terminated",
)
FRAME_VARIABLES = ("score",) + BINARY_FEATURES


@dataclass(frozen=True)
class GameConfig:
    width: int = 10
    height: int = 10
    enemy: bool = True
    powerup: bool = True
    goldcoin: bool = True
    start_score: float = 20.0
    coin_bonus: float = 5.0
    kill_bonus: float = 9.0
    death_score: float = -20.0
    max_ticks: Optional[int] = None

    @property
    def tick_cap(self) -> int:
        return self.max_ticks if self.max_ticks is not None else self.width * self.height * 10

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class GameState:
    width: int
    height: int
    player: tuple
    goal: tuple
    goldcoin: Optional[tuple] = None
    powerup: Optional[tuple] = None
    enemy: Optional[tuple] = None
    score: float = 20.0
    powerup_collected: bool = False
    enemy_killed: bool = False
    terminated: bool = False
    tick: int = 0
    coins: int = 0

    def sprite(self, name):
        return getattr(self, name)


def init_game(seed, config: GameConfig = GameConfig(), rng=None) -> GameState:
    """Place the goal in a random corner and the other sprites on distinct random cells."""
    w, h = config.width, config.height
    if w < 3 or h < 3:
        raise GameError(f"grid must be at least 3x3, got {w}x{h}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    corners = [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)]
    goal = corners[int(rng.integers(4))]
    wanted = ["player"] + [s for s in ("goldcoin", "powerup", "enemy") if getattr(config, s)]
    free = [(x, y) for y in range(h) for x in range(w) if (x, y) != goal]
    if len(free) < len(wanted):
        raise GameError("grid too small to place all sprites")
    picks = rng.choice(len(free), size=len(wanted), replace=False)
    pos = {name: free[int(i)] for name, i in zip(wanted, picks)}
    return GameState(
        width=w,
        height=h,
        player=pos["player"],
        goal=goal,
        goldcoin=pos.get("goldcoin"),
        powerup=pos.get("powerup"),
        enemy=pos.get("enemy"),
        score=config.start_score,
    )


def step(state: GameState, action: str, config: GameConfig = GameConfig()) -> GameState:
    """Advance one tick: move, pay one point, then resolve the entered cell."""
    if state.terminated:
        raise GameError("step after termination")
    try:
        dx, dy = ACTIONS[action]
    except KeyError:
        raise GameError(f"unknown action {action!r}") from None
    x = min(max(state.player[0] + dx, 0), state.width - 1)
    y = min(max(state.player[1] + dy, 0), state.height - 1)
    pos = (x, y)
    new = replace(state, player=pos, score=state.score - 1, tick=state.tick + 1)
    if pos == new.goldcoin:
        new = replace(new, goldcoin=None, score=new.score + config.coin_bonus, coins=new.coins + 1)
    if pos == new.powerup:
        new = replace(new, powerup=None, powerup_collected=True)
    if pos == new.enemy:
        if new.powerup_collected:
            new = replace(new, enemy=None, enemy_killed=True, score=new.score + config.kill_bonus)
        else:
            return replace(new, score=config.death_score, terminated=True)
    if pos == new.goal:
        new = replace(new, terminated=True)
    return new


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    tick: int
    score: float
    binaries: dict

    def value(self, var):
        if var == "score":
            return self.score
        return self.binaries[var]

    def row(self):
        return {"score": self.score, **self.binaries}

    def to_dict(self):
        return {"type": "frame", "tick": self.tick, "score": self.score, **self.binaries}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(int(d["tick"]), float(d["score"]), {k: int(d[k]) for k in BINARY_FEATURES})
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed frame {d!r}: {exc}") from None


def _state_flags(s: GameState):
    return {
        "enemy_exists": int(s.enemy is not None),
        "powerup_exists": int(s.powerup is not None),
        "goldcoin_exists": int(s.goldcoin is not None),
        "powerup_collected": int(s.powerup_collected),
        "enemy_killed": int(s.enemy_killed),
        "terminated": int(s.terminated),
    }


def target_of(prev: GameState, move) -> Optional[str]:
    """Sprite whose direction best matches ``move`` by cosine similarity.

    Only a strictly best, positive similarity counts; ties and a zero move
    target nothing.
    """
    mx, my = move
    norm_m = math.hypot(mx, my)
    if norm_m == 0:
        return None
    best, best_cos, tie = None, 0.0, False
    px, py = prev.player
    for name in SPRITES:
        pos = prev.sprite(name)
        if pos is None:
            continue
        vx, vy = pos[0] - px, pos[1] - py
        norm_v = math.hypot(vx, vy)
        if norm_v == 0:
            continue
        cos = (mx * vx + my * vy) / (norm_m * norm_v)
        if cos > best_cos + 1e-12:
            best, best_cos, tie = name, cos, False
        elif abs(cos - best_cos) <= 1e-12 and best is not None:
            tie = True
    if best is None or tie:
        return None
    return best


def extract_frame(prev: Optional[GameState], action: Optional[str], state: Optional[GameState]) -> Frame:
    """Frame for ``prev`` plus the action that led to ``state``.

    ``action=None`` yields the closing frame of a rollout (no action features).
    """
    flags = _state_flags(prev)
    feats = {f"targeting_{s}": 0 for s in SPRITES}
    feats.update({f"collide_{s}": 0 for s in SPRITES})
    if action is not None:
        move = (state.player[0] - prev.player[0], state.player[1] - prev.player[1])
        tgt = target_of(prev, move)
        if tgt is not None:
            feats[f"targeting_{tgt}"] = 1
        for s in SPRITES:
            if prev.sprite(s) is not None and state.player == prev.sprite(s) and move != (0, 0):
                feats[f"collide_{s}"] = 1
    binaries = {k: (feats[k] if k in feats else flags[k]) for k in BINARY_FEATURES}
    return Frame(prev.tick, float(prev.score), binaries)


# ---------------------------------------------------------------------------
# agents
# ---------------------------------------------------------------------------


def _dist(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _objective(state: GameState, behaviour: str, config: GameConfig):
    if behaviour == "killer":
        if state.powerup is not None and state.enemy is not None:
            return state.powerup
        if state.enemy is not None and state.powerup_collected:
            return state.enemy
        return state.goal
    if behaviour == "coincollector":
        return state.goldcoin if state.goldcoin is not None else state.goal
    if behaviour == "optimal":
        return _best_plan(state, config)[0]
    raise GameError(f"unknown behaviour {behaviour!r}")


def _best_plan(state: GameState, config: GameConfig):
    """Highest-value pickup order ending at the goal, by bonus minus Manhattan length."""
    items = []
    if state.goldcoin is not None:
        items.append(("goldcoin", config.coin_bonus))
    if state.enemy is not None and (state.powerup_collected or state.powerup is not None):
        items.append(("enemy", config.kill_bonus))
        if not state.powerup_collected:
            items.append(("powerup", 0.0))
    best = None
    names = [i[0] for i in items]
    bonus = dict(items)
    for r in range(len(names) + 1):
        for order in permutations(names, r):
            if "enemy" in order and not state.powerup_collected:
                if "powerup" not in order or order.index("powerup") > order.index("enemy"):
                    continue
            if "powerup" in order and "enemy" not in order:
                continue
            route = [state.player] + [state.sprite(n) for n in order] + [state.goal]
            length = sum(_dist(a, b) for a, b in zip(route, route[1:]))
            value = sum(bonus[n] for n in order) - length
            key = (-value, length, order)
            if best is None or key < best[0]:
                best = (key, route[1:])
    return best[1]


def _obstacles(state: GameState, objective):
    blocked = set()
    if state.goal != objective:
        blocked.add(state.goal)
    if state.enemy is not None and state.enemy != objective and not state.powerup_collected:
        blocked.add(state.enemy)
    return blocked


def _bfs_distance(state: GameState, target, blocked):
    dist = {target: 0}
    queue = deque([target])
    while queue:
        cx, cy = queue.popleft()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (cx + dx, cy + dy)
            if 0 <= nxt[0] < state.width and 0 <= nxt[1] < state.height and nxt not in blocked and nxt not in dist:
                dist[nxt] = dist[(cx, cy)] + 1
                queue.append(nxt)
    return dist


def navigate(state: GameState, objective) -> str:
    """Greedy move toward ``objective``.

    Prefers the axis of larger displacement (horizontal on ties) and only
    takes moves that shorten the obstacle-aware path; falls back to the
    plain axis rule when the objective is walled off.
    """
    px, py = state.player
    dx, dy = objective[0] - px, objective[1] - py
    if dx == 0 and dy == 0:
        return "stay"
    horiz = "right" if dx > 0 else "left"
    vert = "up" if dy > 0 else "down"
    if abs(dx) >= abs(dy):
        prefs = [horiz, vert] if dy else [horiz]
    else:
        prefs = [vert, horiz] if dx else [vert]
    blocked = _obstacles(state, objective)
    dist = _bfs_distance(state, objective, blocked)
    here = dist.get(state.player)
    if here is None:
        return prefs[0]
    order = prefs + [a for a in ("right", "left", "up", "down") if a not in prefs]
    for a in order:
        mx, my = ACTIONS[a]
        nxt = (px + mx, py + my)
        if dist.get(nxt, math.inf) == here - 1:
            return a
    return prefs[0]


def choose_action(state: GameState, behaviour: str, rng, epsilon: float, config: GameConfig) -> str:
    if behaviour == "random" or (epsilon > 0 and rng.random() < epsilon):
        return ACTION_NAMES[int(rng.integers(len(ACTION_NAMES)))]
    return navigate(state, _objective(state, behaviour, config))


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------


@dataclass
class Rollout:
    id: int
    seed: int
    agent: str
    epsilon: float
    frames: list
    config: GameConfig = field(default_factory=GameConfig)
    states: Optional[list] = None

    @property
    def final_score(self) -> float:
        return self.frames[-1].score

    @property
    def horizon(self) -> int:
        return len(self.frames)

    def matrix(self, variables=FRAME_VARIABLES) -> np.ndarray:
        return np.array([[f.value(v) for v in variables] for f in self.frames], dtype=float)

    def series(self, individual=None, stat=None) -> "RolloutSeries":
        return RolloutSeries(self)

    def header(self):
        return {
            "type": "rollout",
            "version": FORMAT_VERSION,
            "id": self.id,
            "seed": self.seed,
            "agent": self.agent,
            "epsilon": self.epsilon,
            "config": asdict(self.config),
            "n_frames": len(self.frames),
            "final_score": self.final_score,
        }


class RolloutSeries:
    """Adapter that lets the explanation engine read one rollout."""

    kinds = {"score": "continuous", **{b: "binary" for b in BINARY_FEATURES}}

    def __init__(self, rollout: Rollout):
        self.rollout = rollout
        self.horizon = len(rollout.frames)

    def __contains__(self, var):
        return var in self.kinds

    def _frame(self, t):
        if not 0 <= t < self.horizon:
            raise DataError(f"frame {t} outside [0, {self.horizon})")
        return self.rollout.frames[t]

    def value(self, var, t):
        return float(self._frame(t).value(var))

    def row(self, t):
        return {k: float(v) for k, v in self._frame(t).row().items()}

    def phi(self, var, t):
        return None


class RolloutSet(dict):
    """Rollouts keyed by id; ``series(id)`` feeds the explanation engine."""

    def series(self, individual, stat=None):
        try:
            return self[individual].series()
        except KeyError:
            raise DataError(f"no rollout with id {individual}") from None


def run_agent(
    behaviour: str,
    seed: int,
    epsilon: float = 0.0,
    config: GameConfig = GameConfig(),
    rollout_id: int = 0,
    record_states: bool = False,
) -> Rollout:
    """Play one game with a scripted behaviour, replacing each action by a random one with probability ``epsilon``."""
    if behaviour not in BEHAVIOURS:
        raise GameError(f"unknown behaviour {behaviour!r}; choose from {BEHAVIOURS}")
    if not 0 <= epsilon < 1:
        raise GameError("epsilon must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    state = init_game(seed, config, rng=rng)
    frames = []
    states = [state] if record_states else None
    cap = config.tick_cap
    while not state.terminated and state.tick < cap:
        action = choose_action(state, behaviour, rng, epsilon, config)
        nxt = step(state, action, config)
        frames.append(extract_frame(state, action, nxt))
        state = nxt
        if record_states:
            states.append(state)
    frames.append(extract_frame(state, None, None))
    return Rollout(rollout_id, int(seed), behaviour, float(epsilon), frames, config, states)


def rollout_seed(master_seed: int, index: int) -> int:
    """Independent per-rollout seed derived from the master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def simulate(
    behaviour: str,
    n_rollouts: int,
    epsilon: float = 0.0,
    seed: int = 0,
    config: GameConfig = GameConfig(),
    record_states: bool = False,
) -> RolloutSet:
    out = RolloutSet()
    for i in range(n_rollouts):
        out[i] = run_agent(behaviour, rollout_seed(seed, i), epsilon, config, rollout_id=i, record_states=record_states)
    return out


def score_identity_holds(r: Rollout) -> bool:
    """Final score equals start - ticks + coin and kill bonuses, or the death score."""
    cfg = r.config
    last = r.frames[-1]
    ticks = last.tick
    died = last.binaries["terminated"] and not last.binaries["enemy_killed"] and any(
        f.binaries["collide_enemy"] for f in r.frames[:-1]
    )
    if died:
        return r.final_score == cfg.death_score
    coins = sum(f.binaries["collide_goldcoin"] for f in r.frames[:-1])
    kills = int(last.binaries["enemy_killed"])
    return r.final_score == cfg.start_score - ticks + cfg.coin_bonus * coins + cfg.kill_bonus * kills


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def write_rollouts(path, rollouts) -> None:
    """JSONL: a header object per rollout followed by one line per frame."""
    lines = []
    for r in (rollouts.values() if isinstance(rollouts, dict) else rollouts):
        lines.append(json.dumps(r.header(), sort_keys=True))
        lines.extend(json.dumps(f.to_dict(), sort_keys=True) for f in r.frames)
    Path(path).write_text("\n".join(lines) + "\n")


def read_rollouts(path) -> RolloutSet:
    out = RolloutSet()
    current = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        kind = obj.get("type")
        if kind == "rollout":
            current = Rollout(
                int(obj["id"]),
                int(obj["seed"]),
                obj["agent"],
                float(obj.get("epsilon", 0.0)),
                [],
                GameConfig.from_dict(obj.get("config", {})),
            )
            if current.id in out:
                raise DataError(f"{path}:{lineno}: duplicate rollout id {current.id}")
            out[current.id] = current
        elif kind == "frame":
            if current is None:
                raise DataError(f"{path}:{lineno}: frame before any rollout header")
            frame = Frame.from_dict(obj)
            if current.frames and frame.tick <= current.frames[-1].tick:
                raise DataError(f"{path}:{lineno}: ticks must increase")
            current.frames.append(frame)
        else:
            raise DataError(f"{path}:{lineno}: unknown record type {kind!r}")
    for r in out.values():
        if not r.frames:
            raise DataError(f"{path}: rollout {r.id} has no frames")
    return out


_GLYPHS = {"goal": "G", "goldcoin": "$", "powerup": "P", "enemy": "E"}


def render_state(state: GameState) -> str:
    """ASCII picture of the board, top row first."""
    grid = [["." for _ in range(state.width)] for _ in range(state.height)]
    for name, glyph in _GLYPHS.items():
        pos = state.sprite(name)
        if pos is not None:
            grid[pos[1]][pos[0]] = glyph
    px, py = state.player
    grid[py][px] = "@" if state.powerup_collected else "A"
    rows = ["".join(r) for r in reversed(grid)]
    return f"tick {state.tick} score {state.score:g}\n" + "\n".join(rows)
