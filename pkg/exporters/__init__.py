# Exporters module
