"""Hand-built explanation trees for sequence, masking and rendering tests."""

from tsce.rules import ERTriple
from tsce.tree import ExplanationNode, ExplanationTree, SelectionConfig


def chain_tree(top_t, sigs, var="Mobility", other="Health", alphas=(0.6, 0.5), phi=10.0):
    """Chain ``var_t -> var_{t-1} -> ...`` where each inner node also has an ``other_t`` leaf.

    ``sigs`` lists ``(er of var_{t-1}, er of other_t)`` per inner node, latest
    first; the last ``var`` node is a leaf.
    """
    nodes = [ExplanationNode(0, var, top_t, "c", phi - 1.0, phi)]
    edges = []
    cur = 0
    for k, (er_self, er_other) in enumerate(sigs):
        t = top_t - k
        depth = nodes[cur].depth + 1
        self_id = len(nodes)
        nodes.append(
            ExplanationNode(self_id, var, t - 1, "c", phi - 1.0, phi, ERTriple(*er_self), alphas[0], depth=depth)
        )
        nodes.append(
            ExplanationNode(self_id + 1, other, t, "c", phi - 1.0, phi, ERTriple(*er_other), alphas[1], depth=depth)
        )
        edges += [(cur, self_id), (cur, self_id + 1)]
        cur = self_id
    q = {"var": var, "t": top_t, "individual": 0, "relation": "<", "stat": "mean", "mode": "continuous"}
    return ExplanationTree(tuple(nodes), tuple(edges), selection=SelectionConfig(K=len(sigs)), question=q)
