#include "anydb/rand.hpp"
#include "anydb/storage.hpp"

namespace anydb {

Dataset load_dataset(const LoaderConfig& cfg) {
  Dataset ds;
  ds.districts_per_warehouse = cfg.districts_per_warehouse;
  ds.customers_per_district = cfg.customers_per_district;
  ds.orders_per_district = cfg.orders_per_district;
  ds.items = cfg.items;
  ds.partitions.resize(cfg.warehouses);

  // Item prices are identical in every replica.
  Rng item_rng(mix_seed(cfg.seed, 0xABCD));
  std::vector<int64_t> prices(cfg.items + 1);
  for (int i = 1; i <= cfg.items; i++) prices[i] = item_rng.uniform(100, 10000);

  for (int w = 0; w < cfg.warehouses; w++) {
    Partition& p = ds.partitions[w];
    p.partition_id = w;
    Rng rng(mix_seed(cfg.seed, uint64_t(w)));

    p.warehouse.emplace(key_wh(w), make_row({w, 0}));

    for (int i = 1; i <= cfg.items; i++)
      p.item.emplace(key_item(i), make_row({i, prices[i]}));
    for (int i = 1; i <= cfg.items; i++)
      p.stock.emplace(key_stock(w, i), make_row({i, w, rng.uniform(10, 100)}));

    p.cust_statics.resize(cfg.districts_per_warehouse);
    for (int d = 1; d <= cfg.districts_per_warehouse; d++) {
      p.district.emplace(key_dist(w, d), make_row({d, w, 0}));

      auto statics = std::make_shared<std::vector<CustStatic>>();
      statics->reserve(cfg.customers_per_district);
      for (int c = 1; c <= cfg.customers_per_district; c++) {
        CustStatic cs;
        cs.c_id = c;
        cs.c_last = int32_t(rng.nurand(255, 0, 999));
        cs.c_state = int32_t(rng.uniform(0, 25) * 26 + rng.uniform(0, 25));
        statics->push_back(cs);
        p.customer.emplace(key_cust(w, d, c),
                           make_row({c, d, w, cs.c_last, cs.c_state, 0, 0, 0}));
      }
      p.cust_statics[d - 1] = statics;

      int open_from = cfg.orders_per_district -
                      int(cfg.orders_per_district * cfg.open_order_fraction) + 1;
      for (int o = 1; o <= cfg.orders_per_district; o++) {
        int64_t o_c = rng.uniform(1, cfg.customers_per_district);
        int64_t entry = rng.uniform(2005, 2012);
        p.orders.emplace(key_order(w, d, o), make_row({o, w, d, o_c, entry}));
        if (o >= open_from)
          p.new_order.emplace(key_order(w, d, o), make_row({o, w, d}));
        int lines = int(rng.uniform(5, 15));
        for (int n = 1; n <= lines; n++) {
          int64_t i_id = rng.uniform(1, cfg.items);
          int64_t amount = rng.uniform(1, 999999);
          p.order_line.emplace(key_oline(w, d, o, n),
                               make_row({o, w, d, n, i_id, amount, 5}));
        }
      }
    }
  }
  return ds;
}

}  // namespace anydb
