"""networkx views of a task dependency network"""

import networkx as nx

from .model import TaskDependencyNetwork


def directed_graph(net: TaskDependencyNetwork) -> nx.DiGraph:
    """Goods and agents as nodes, material flow as arcs (units collapsed)"""
    graph = nx.DiGraph()
    for good in net.goods:
        graph.add_node(good, kind="good")
    for consumer in net.consumers:
        graph.add_node(consumer.id, kind="consumer")
        for good in consumer.values:
            graph.add_edge(good, consumer.id)
    for producer in net.producers:
        graph.add_node(producer.id, kind="producer")
        graph.add_edge(producer.id, producer.output)
        for good, _ in producer.inputs:
            graph.add_edge(good, producer.id)
    return graph


def undirected_multigraph(net: TaskDependencyNetwork) -> nx.MultiGraph:
    """One undirected edge per unit-edge, so parallel units show up as cycles"""
    graph = nx.MultiGraph()
    for good in net.goods:
        graph.add_node(good)
    for agent in (*net.consumers, *net.producers):
        graph.add_node(agent.id)
    for edge in sorted(net.edges):
        graph.add_edge(edge.source, edge.target, key=(edge.good, edge.unit, edge.source))
    return graph


def good_order(net: TaskDependencyNetwork) -> list:
    """Goods in topological (upstream first) order, ties by id"""
    graph = directed_graph(net)
    order = list(nx.lexicographical_topological_sort(graph))
    goods = set(net.goods)
    return [node for node in order if node in goods]
