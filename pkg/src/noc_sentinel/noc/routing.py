from __future__ import annotations
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.noc.types import Coordinate, Flit, FlitKind, PortId
from typing import Callable, Iterable, Mapping, Sequence

# (router, header flit, current quantum) -> output port override, or None for plain XY.
RoutingHook = Callable[[Coordinate, Flit, int], PortId | None]

Channel = tuple[Coordinate, PortId]


def step_toward(current: Coordinate, target: Coordinate) -> PortId:
    """XY decision without bounds checks; `target` may lie outside the mesh."""
    if current.x < target.x:
        return PortId.EAST
    if current.x > target.x:
        return PortId.WEST
    if current.y < target.y:
        return PortId.NORTH
    if current.y > target.y:
        return PortId.SOUTH
    return PortId.LOCAL


def step_toward_yx(current: Coordinate, target: Coordinate) -> PortId:
    if current.y < target.y:
        return PortId.NORTH
    if current.y > target.y:
        return PortId.SOUTH
    if current.x < target.x:
        return PortId.EAST
    if current.x > target.x:
        return PortId.WEST
    return PortId.LOCAL


def xy_route(current: Coordinate, dest: Coordinate, width: int, height: int) -> PortId:
    """Resolve the x offset fully, then y, then eject."""
    for c in (current, dest):
        if not c.inside(width, height):
            raise InvalidArgumentError(f"coordinate ({c}) outside {width}x{height} mesh")
    return step_toward(current, dest)


def arbitrate_ttl(requests: Iterable[tuple[PortId, int]]) -> PortId:
    """Grant the oldest request; equal ages go to the lowest canonical port."""
    best: tuple[PortId, int] | None = None
    for port, age in requests:
        if age < 0:
            raise InvalidArgumentError(f"negative age {age} for {port.name}")
        if best is None or age > best[1] or (age == best[1] and port < best[0]):
            best = (port, age)
    if best is None:
        raise InvalidArgumentError("arbitration needs at least one request")
    return best[0]


def neighbor(c: Coordinate, port: PortId) -> Coordinate:
    dx, dy = port.delta
    return Coordinate(c.x + dx, c.y + dy)


def trace_route(
    src: Coordinate,
    dest: Coordinate,
    width: int,
    height: int,
    hooks: Mapping[Coordinate, Sequence[RoutingHook]] | None = None,
    quantum: int = 0,
) -> list[Channel]:
    """
    Channels a lone header would claim from src toward dest.

    The walk stops on ejection, on leaving the mesh (drop), or after a hop
    budget when tampered routers send the header around in circles.
    """
    hooks = hooks or {}
    header = Flit(FlitKind.HEADER, packet_id=-1, payload=0, inject_cycle=0,
                  src=src, dest=dest, length=1)
    channels: list[Channel] = []
    current = src
    for _ in range(4 * width * height):
        port = None
        for hook in hooks.get(current, ()):
            port = hook(current, header, quantum)
            if port is not None:
                break
        if port is None:
            port = step_toward(current, header.route_dest)
        channels.append((current, port))
        if port is PortId.LOCAL:
            break
        current = neighbor(current, port)
        if not current.inside(width, height):
            break
    return channels


def channel_dependencies(routes: Iterable[Sequence[Channel]]) -> set[tuple[Channel, Channel]]:
    edges = set()
    for route in routes:
        for held, wanted in zip(route, route[1:]):
            edges.add((held, wanted))
    return edges


def has_dependency_cycle(edges: Iterable[tuple[Channel, Channel]]) -> bool:
    graph: dict[Channel, list[Channel]] = {}
    for a, b in edges:
        graph.setdefault(a, []).append(b)
        graph.setdefault(b, [])

    # 0 = unvisited, 1 = on stack, 2 = done
    state = {node: 0 for node in graph}
    for root in sorted(graph):
        if state[root]:
            continue
        stack = [(root, iter(graph[root]))]
        state[root] = 1
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                state[node] = 2
                stack.pop()
            elif state[child] == 1:
                return True
            elif state[child] == 0:
                state[child] = 1
                stack.append((child, iter(graph[child])))
    return False
