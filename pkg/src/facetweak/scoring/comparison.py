from typing import Dict, List, Sequence
import logging
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd


@dataclass
class ClusterComparison:
    """Vanilla against tweaked error on the faces routed to one cluster."""
    cluster: int
    count: int
    vanilla_error: float
    tweaked_error: float
    improvement: float
    verdict: str


class ModelComparator:
    """Compares per-image errors of two models cluster by cluster."""

    def __init__(self, tolerance: float = 1e-9):
        """
        Args:
            tolerance: Error difference (percent points) treated as a tie
        """
        self.tolerance = tolerance
        self.logger = logging.getLogger(__name__)

    def verdict(self, vanilla: float, tweaked: float) -> str:
        if not (np.isfinite(vanilla) and np.isfinite(tweaked)):
            return 'no data'
        if tweaked < vanilla - self.tolerance:
            return 'improved'
        if tweaked > vanilla + self.tolerance:
            return 'worse'
        return 'unchanged'

    def compare(
        self,
        vanilla_errors: Sequence[float],
        tweaked_errors: Sequence[float],
        clusters: Sequence[int],
        k: int,
    ) -> List[ClusterComparison]:
        """
        Args:
            vanilla_errors: Per-image vanilla errors (percent)
            tweaked_errors: Per-image tweaked errors, same order
            clusters: Routed cluster of each image
            k: Number of clusters

        Returns:
            One ClusterComparison per cluster, in index order
        """
        v = np.asarray(vanilla_errors, dtype=np.float64)
        t = np.asarray(tweaked_errors, dtype=np.float64)
        c = np.asarray(clusters)
        results = []
        for cluster in range(k):
            members = c == cluster
            count = int(members.sum())
            ve = float(v[members].mean()) if count else float('nan')
            te = float(t[members].mean()) if count else float('nan')
            results.append(ClusterComparison(
                cluster=cluster,
                count=count,
                vanilla_error=ve,
                tweaked_error=te,
                improvement=ve - te,
                verdict=self.verdict(ve, te),
            ))
        return results

    def summarize(self, comparisons: Sequence[ClusterComparison]) -> Dict:
        """Share of populated clusters where tweaking matched or beat vanilla, and a one-line summary."""
        populated = [c for c in comparisons if c.count]
        not_worse = sum(c.verdict in ('improved', 'unchanged') for c in populated)
        share = not_worse / len(populated) if populated else float('nan')
        summary = {
            'clusters': len(comparisons),
            'populated': len(populated),
            'improved': sum(c.verdict == 'improved' for c in populated),
            'worse': sum(c.verdict == 'worse' for c in populated),
            'not_worse_share': share,
            'summary': self._generate_summary(share),
        }
        self.logger.info(summary['summary'])
        return summary

    def _generate_summary(self, share: float) -> str:
        if not np.isfinite(share):
            return "No cluster received evaluation faces"
        if share >= 0.9:
            return f"Tweaking matched or improved nearly every cluster ({share:.0%})"
        if share >= 0.6:
            return f"Tweaking matched or improved most clusters ({share:.0%})"
        return f"Tweaking helped only {share:.0%} of clusters"

    @staticmethod
    def to_frame(comparisons: Sequence[ClusterComparison]) -> pd.DataFrame:
        return pd.DataFrame(
            [asdict(c) for c in comparisons],
            columns=['cluster', 'count', 'vanilla_error', 'tweaked_error', 'improvement', 'verdict'],
        )
