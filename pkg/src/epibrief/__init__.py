"""Multi-agent epidemiological surveillance briefings.

A manager agent decomposes an analyst's query, delegates to specialist
sub-agents backed by WHO outbreak news, CDC WONDER statistics, and
PubMed literature, verifies the findings for contradictions, and
streams a cited briefing over server-sent events.
"""

__version__ = "0.1.0"
