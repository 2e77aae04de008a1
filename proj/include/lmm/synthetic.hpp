#pragma once

#include <cstdint>
#include <string>

#include "lmm/estimation.hpp"
#include "lmm/simulator.hpp"

namespace lmm {

/// Queue texture for rendering a model event stream as LOBSTER-style data.
/// Chips (uninformed arrivals) consume the head lot and the level instantly
/// replenishes; price jumps sweep one side and rebuild both quotes; flickers
/// are short-lived extra lots.
struct BookTexture {
    long tick_units = 100;      // integer price units per tick
    long bid0_units = 999900;   // initial best bid; ask = bid + tick
    long base_lot = 100;        // replenished displayed size per level
    double flicker_rate = 0.015;  // transient submissions per second per side
    long flicker_size = 300;
    double flicker_ttl = 1.2;   // mean flicker lifetime (s)
};

/// Renders the stream as row-paired messages and level-1 snapshots. Book
/// columns carry the settled post-event state for every row of an event's
/// message bundle.
LobsterData synthesize_lobster(const MarketEventStream& stream, const BookTexture& texture,
                               std::uint64_t seed);

void write_lobster_csv(const LobsterData& data, const std::string& message_path,
                       const std::string& orderbook_path);

}  // namespace lmm
