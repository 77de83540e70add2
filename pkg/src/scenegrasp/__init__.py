"""Scene-completion grasp planning from a single depth view."""
