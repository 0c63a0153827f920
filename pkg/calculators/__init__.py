# Calculators module
