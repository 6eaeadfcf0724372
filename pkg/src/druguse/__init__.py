"""Survey analytics toolkit for drug-consumption data.

The package covers the full pipeline: ingestion and user/non-user labelling
(:mod:`druguse.dataset`), attribute quantification (:mod:`druguse.quantify`),
descriptive and correlation statistics (:mod:`druguse.stats`), feature ranking
(:mod:`druguse.rank`), classifier families (:mod:`druguse.classify`),
leave-one-out benchmarking (:mod:`druguse.evaluate`), usage-correlation
pleiades (:mod:`druguse.pleiades`), elastic-map projections and risk surfaces
(:mod:`druguse.maps`), and a command line front end (:mod:`druguse.cli`).
"""

__version__ = "0.1.0"
