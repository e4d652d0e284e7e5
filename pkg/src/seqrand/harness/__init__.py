"""Monte-Carlo harness: data-generating processes, risk estimates and reports."""
