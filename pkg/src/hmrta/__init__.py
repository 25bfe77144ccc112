"""Human multi-robot task allocation as a mixed-integer linear program."""
