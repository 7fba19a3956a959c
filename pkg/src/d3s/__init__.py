"""UAV-as-a-service planning toolkit: demand, decision, deployment, service.

Modules:
  scenario     demand model, scenario files, failure injection
  radio        channel gain / SINR / Shannon rate primitives
  fleet        UAV platform specs
  dimensioning fleet sizing and placement (Pareto front over count/lifetime)
  trajectory   slotted path planning, charging schedules, validation
  routing      backbone engines: proactive, back-pressure, opportunistic
  simulator    four-phase slotted simulation and reporting
  casestudy    the bundled self-healing scenario generator
  cli          command-line front end (also: python -m d3s.cli)
"""

__version__ = "0.1.0"
