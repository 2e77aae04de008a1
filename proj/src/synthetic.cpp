#include "lmm/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "lmm/rng.hpp"

namespace lmm {

namespace {

enum class ItemKind : std::int8_t { market, flicker_in, flicker_out };

struct TimelineItem {
    double t;
    ItemKind kind;
    MarketEventKind market;   // for market items
    Side side;                // for flicker items
    long lot_id;              // flicker identity
};

struct Lot {
    long id;
    long size;
};

}  // namespace

LobsterData synthesize_lobster(const MarketEventStream& stream, const BookTexture& tex,
                               std::uint64_t seed) {
    LobsterData out;
    long bid = tex.bid0_units;
    long ask = bid + tex.tick_units;
    long next_id = 1;
    std::deque<Lot> bid_q, ask_q;
    std::unordered_set<long> alive_flickers;
    std::unordered_map<long, long> flicker_ids;  // timeline placeholder -> order id

    std::vector<TimelineItem> items;
    items.reserve(stream.events.size() + 64);
    for (const MarketEvent& e : stream.events)
        items.push_back(TimelineItem{e.t, ItemKind::market, e.kind, Side::bid, 0});
    // Flicker arrivals/expiries per side.
    for (Side side : {Side::bid, Side::ask}) {
        if (tex.flicker_rate <= 0.0) break;
        Rng rng(derive_seed(seed, side == Side::bid ? 11 : 12));
        double t = 0.0;
        while (true) {
            t += rng.exponential(tex.flicker_rate);
            if (t >= stream.horizon) break;
            const long id = -(static_cast<long>(items.size()) + 1);  // placeholder, fixed below
            items.push_back(TimelineItem{t, ItemKind::flicker_in, MarketEventKind::price_up, side, id});
            const double t_out = t + rng.exponential(1.0 / tex.flicker_ttl);
            if (t_out < stream.horizon)
                items.push_back(
                    TimelineItem{t_out, ItemKind::flicker_out, MarketEventKind::price_up, side, id});
        }
    }
    std::sort(items.begin(), items.end(), [](const TimelineItem& a, const TimelineItem& b) {
        if (a.t != b.t) return a.t < b.t;
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });

    struct Msg {
        OrderEventType type;
        long id, size, price;
        int dir;
    };
    std::vector<Msg> bundle;
    const auto total = [](const std::deque<Lot>& q) {
        long s = 0;
        for (const Lot& l : q) s += l.size;
        return s;
    };
    const auto flush = [&](double t) {
        for (const Msg& m : bundle) {
            out.events.push_back(OrderEvent{t, m.type, m.id, m.size, m.price, m.dir});
            out.snapshots.push_back(BookSnapshot{t, ask, total(ask_q), bid, total(bid_q)});
        }
        bundle.clear();
    };
    const auto sweep = [&](Side side) {
        auto& q = side == Side::bid ? bid_q : ask_q;
        const long level = side == Side::bid ? bid : ask;
        const int dir = side == Side::bid ? 1 : -1;
        for (const Lot& l : q) {
            bundle.push_back(Msg{OrderEventType::execution_visible, l.id, l.size, level, dir});
            alive_flickers.erase(l.id);
        }
        q.clear();
    };
    const auto refresh = [&](Side side) {
        auto& q = side == Side::bid ? bid_q : ask_q;
        const long level = side == Side::bid ? bid : ask;
        const int dir = side == Side::bid ? 1 : -1;
        for (const Lot& l : q) {
            bundle.push_back(Msg{OrderEventType::deletion, l.id, l.size, level, dir});
            alive_flickers.erase(l.id);
        }
        q.clear();
    };
    const auto seed_level = [&](Side side) {
        auto& q = side == Side::bid ? bid_q : ask_q;
        const long level = side == Side::bid ? bid : ask;
        const int dir = side == Side::bid ? 1 : -1;
        q.push_back(Lot{next_id, tex.base_lot});
        bundle.push_back(Msg{OrderEventType::submission, next_id++, tex.base_lot, level, dir});
    };

    // Pre-populate both levels (rows at t = 0 describe the opening book).
    seed_level(Side::bid);
    seed_level(Side::ask);
    flush(0.0);

    for (const TimelineItem& item : items) {
        switch (item.kind) {
            case ItemKind::market:
                switch (item.market) {
                    case MarketEventKind::uninformed_sell: {  // chip at the bid
                        Lot head = bid_q.front();
                        bid_q.pop_front();
                        alive_flickers.erase(head.id);
                        bundle.push_back(
                            Msg{OrderEventType::execution_visible, head.id, head.size, bid, 1});
                        if (total(bid_q) < tex.base_lot) seed_level(Side::bid);
                        break;
                    }
                    case MarketEventKind::uninformed_buy: {  // chip at the ask
                        Lot head = ask_q.front();
                        ask_q.pop_front();
                        alive_flickers.erase(head.id);
                        bundle.push_back(
                            Msg{OrderEventType::execution_visible, head.id, head.size, ask, -1});
                        if (total(ask_q) < tex.base_lot) seed_level(Side::ask);
                        break;
                    }
                    case MarketEventKind::price_down:
                        sweep(Side::bid);    // sellers trade through the bid
                        refresh(Side::ask);  // stale asks pulled
                        bid -= tex.tick_units;
                        ask -= tex.tick_units;
                        seed_level(Side::bid);
                        seed_level(Side::ask);
                        break;
                    case MarketEventKind::price_up:
                        sweep(Side::ask);
                        refresh(Side::bid);
                        bid += tex.tick_units;
                        ask += tex.tick_units;
                        seed_level(Side::bid);
                        seed_level(Side::ask);
                        break;
                }
                break;
            case ItemKind::flicker_in: {
                auto& q = item.side == Side::bid ? bid_q : ask_q;
                const long level = item.side == Side::bid ? bid : ask;
                const int dir = item.side == Side::bid ? 1 : -1;
                const long id = next_id++;
                q.push_back(Lot{id, tex.flicker_size});
                alive_flickers.insert(id);
                flicker_ids[item.lot_id] = id;
                bundle.push_back(Msg{OrderEventType::submission, id, tex.flicker_size, level, dir});
                break;
            }
            case ItemKind::flicker_out: {
                const auto it = flicker_ids.find(item.lot_id);
                if (it == flicker_ids.end()) break;
                const long id = it->second;
                if (!alive_flickers.count(id)) break;  // consumed or pulled already
                auto& q = item.side == Side::bid ? bid_q : ask_q;
                const long level = item.side == Side::bid ? bid : ask;
                const int dir = item.side == Side::bid ? 1 : -1;
                for (auto qit = q.begin(); qit != q.end(); ++qit)
                    if (qit->id == id) {
                        bundle.push_back(Msg{OrderEventType::deletion, id, qit->size, level, dir});
                        q.erase(qit);
                        break;
                    }
                alive_flickers.erase(id);
                if (total(item.side == Side::bid ? bid_q : ask_q) < tex.base_lot)
                    seed_level(item.side);
                break;
            }
        }
        flush(item.t);
    }
    return out;
}

void write_lobster_csv(const LobsterData& data, const std::string& message_path,
                       const std::string& orderbook_path) {
    std::ofstream msg(message_path), book(orderbook_path);
    if (!msg || !book) throw std::runtime_error("write_lobster_csv: cannot open output files");
    char buf[160];
    for (size_t i = 0; i < data.events.size(); ++i) {
        const OrderEvent& e = data.events[i];
        const BookSnapshot& s = data.snapshots[i];
        std::snprintf(buf, sizeof buf, "%.9f,%d,%ld,%ld,%ld,%d\n", e.timestamp,
                      static_cast<int>(e.type), e.order_id, e.size, e.price, e.direction);
        msg << buf;
        std::snprintf(buf, sizeof buf, "%ld,%ld,%ld,%ld\n", s.best_ask, s.ask_size, s.best_bid,
                      s.bid_size);
        book << buf;
    }
}

}  // namespace lmm
