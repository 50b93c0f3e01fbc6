"""Agent programs: meeting windows, tree building, election, counting."""
