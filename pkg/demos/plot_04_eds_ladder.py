"""
Equity default swap on a 70%-down barrier
=========================================

Commerzbank, 15 December 2009: spot 5.945, six months, ATM vol 52% and
about 80% at the barrier.  Inputs the market description leaves open
(rates, dividends, skew shape) are fixed to documented defaults and kept in
the output record.  A ladder of conservative bumps is then applied.
"""

from firsthit.records import dumps
from firsthit.scenarios import commerzbank_eds_setup, conservative_ladder, price_eds, run_ladder

trade, market, fwd_spec, config, assumptions = commerzbank_eds_setup()
quote = price_eds(trade, market, fwd_spec, config, assumptions)
print(f"base: {quote.price_bp:.1f} bp")

ladder = run_ladder(trade, market, fwd_spec, conservative_ladder(), config,
                    assumptions=assumptions)
for row in ladder.rows:
    print(f"{row.name:<32} {row.price_bp:8.1f} bp")

# the skew at the barrier drives the level; the ordering is robust
for name, value in assumptions.items():
    print(f"  {name}: {value}")

with open("eds_record.json", "w") as fh:
    fh.write(dumps(ladder.record()))
