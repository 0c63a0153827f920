# Tasks module
