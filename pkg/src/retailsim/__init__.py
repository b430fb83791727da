"""Agent-based discrete-event simulator of a retail department.

Customers browse, seek help, pay, and return goods; sales staff, cashiers,
and a section manager serve them over a 10-week horizon of closed trading
days. The package also ships the experiment harness (staffing and
empowerment sweeps) and the inferential statistics (two-way ANOVA, Levene,
Tukey HSD) used to analyse sweep results.
"""

__version__ = "0.1.0"
