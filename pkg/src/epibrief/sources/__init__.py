"""Protocol clients for the three public-health data sources."""
