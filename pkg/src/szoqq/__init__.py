"""Safe zeroth-order sequential QCQP optimisation."""
