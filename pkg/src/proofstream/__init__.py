"""proofstream: an incremental, parallel proof-document checking engine.

Layers, bottom up: kernel (trusted inferences), syntax (concrete
language), tactics (steps, search, replay), document (versioned spans),
stm (state chain, plans, memoized transactions and regions), scheduler
(worker pool), engine (coordinator), service (protocol, transports, CLI
glue), agent (hammer search).
"""

__version__ = "0.1.0"
