"""Structural classes of networks that decide which guarantees apply"""

import networkx as nx

from src.network.graph import undirected_multigraph
from src.network.model import TaskDependencyNetwork


def is_polytree(net: TaskDependencyNetwork) -> bool:
    """At most one undirected path between any two vertices; parallel unit-edges count as two paths"""
    graph = undirected_multigraph(net)
    for component in nx.connected_components(graph):
        sub = graph.subgraph(component)
        if sub.number_of_edges() != sub.number_of_nodes() - 1:
            return False
    return True


def is_tree(net: TaskDependencyNetwork) -> bool:
    return is_polytree(net) and len(net.consumers) <= 1


def has_input_complementarities(net: TaskDependencyNetwork) -> bool:
    return any(p.input_count > 1 for p in net.producers)
