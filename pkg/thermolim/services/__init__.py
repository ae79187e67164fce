"""Pure numerical services: geometry, tilings, models, audits and experiments."""
