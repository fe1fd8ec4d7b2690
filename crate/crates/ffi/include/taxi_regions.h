#ifndef TAXI_REGIONS_H
#define TAXI_REGIONS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrModel {
  TR_MODEL_EXPONENTIAL = 0,
  TR_MODEL_LOGNORMAL = 1,
  TR_MODEL_POWER_LAW = 2,
  TR_MODEL_TRUNCATED_POWER_LAW = 3,
} TrModel;

typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_NULL_POINTER = 1,
  TR_STATUS_INVALID_ARGUMENT = 2,
  TR_STATUS_OUT_OF_BOUNDS = 3,
  TR_STATUS_INDEX_OUT_OF_RANGE = 4,
  TR_STATUS_FIT_FAILED = 5,
  TR_STATUS_PANIC = 99,
} TrStatus;

typedef struct TrFitComparison TrFitComparison;

typedef struct TrItemsets TrItemsets;

typedef struct TrQuadTree TrQuadTree;

/**
 * One quad-tree leaf.
 */
typedef struct TrLeaf {
  uint32_t region_id;
  uint32_t depth;
  double lat_min;
  double lat_max;
  double lon_min;
  double lon_max;
  uint64_t visit_count;
} TrLeaf;

/**
 * One fitted family. `params` holds, in order:
 * exponential `rate`; lognormal `mu, sigma`; power law `alpha, x_min`;
 * truncated power law `alpha, rate, x_min`. Unused slots are NaN.
 */
typedef struct TrFit {
  enum TrModel model;
  double params[3];
  double log_likelihood;
  double aic;
  double delta_aic;
  double weight;
  uint32_t k;
} TrFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a successful call.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *tr_last_error(void);

/**
 * Great-circle distance in metres on the 6,371 km sphere.
 */
double tr_great_circle(double lat1, double lon1, double lat2, double lon2);

/**
 * Pearson correlation of two length-`n` arrays.
 *
 * # Safety
 * `x` and `y` must point to `n` readable doubles; `r_out` must be writable.
 */
enum TrStatus tr_pearson(const double *x, const double *y, size_t n, double *r_out);

/**
 * Builds a region quad-tree over `n` points inside the given box.
 *
 * # Safety
 * `lats` and `lons` must point to `n` readable doubles; `tree_out` must be writable.
 */
enum TrStatus tr_quadtree_build(const double *lats,
                                const double *lons,
                                size_t n,
                                double lat_min,
                                double lat_max,
                                double lon_min,
                                double lon_max,
                                double threshold_fraction,
                                uint32_t max_depth,
                                struct TrQuadTree **tree_out);

/**
 * Region id of the leaf containing `(lat, lon)`.
 *
 * # Safety
 * `tree` must come from [`tr_quadtree_build`]; `region_out` must be writable.
 */
enum TrStatus tr_quadtree_locate(const struct TrQuadTree *tree,
                                 double lat,
                                 double lon,
                                 uint32_t *region_out);

/**
 * # Safety
 * `tree` must come from [`tr_quadtree_build`]; `count_out` must be writable.
 */
enum TrStatus tr_quadtree_leaf_count(const struct TrQuadTree *tree, size_t *count_out);

/**
 * Leaf `index`, in region id order.
 *
 * # Safety
 * `tree` must come from [`tr_quadtree_build`]; `leaf_out` must be writable.
 */
enum TrStatus tr_quadtree_leaf(const struct TrQuadTree *tree,
                               size_t index,
                               struct TrLeaf *leaf_out);

/**
 * # Safety
 * `tree` must be null or come from [`tr_quadtree_build`], and not be freed twice.
 */
void tr_quadtree_free(struct TrQuadTree *tree);

/**
 * Fits the four candidate families and ranks them by AIC. A NaN `x_min` uses the sample minimum.
 *
 * # Safety
 * `samples` must point to `n` readable doubles; `cmp_out` must be writable.
 */
enum TrStatus tr_fit_compare(const double *samples,
                             size_t n,
                             double x_min,
                             struct TrFitComparison **cmp_out);

/**
 * # Safety
 * `cmp` must come from [`tr_fit_compare`]; `count_out` must be writable.
 */
enum TrStatus tr_fit_count(const struct TrFitComparison *cmp, size_t *count_out);

/**
 * Index of the selected family.
 *
 * # Safety
 * `cmp` must come from [`tr_fit_compare`]; `index_out` must be writable.
 */
enum TrStatus tr_fit_best(const struct TrFitComparison *cmp, size_t *index_out);

/**
 * # Safety
 * `cmp` must come from [`tr_fit_compare`]; `fit_out` must be writable.
 */
enum TrStatus tr_fit_get(const struct TrFitComparison *cmp, size_t index, struct TrFit *fit_out);

/**
 * # Safety
 * `cmp` must be null or come from [`tr_fit_compare`], and not be freed twice.
 */
void tr_fit_free(struct TrFitComparison *cmp);

/**
 * Frequent itemsets of a row-major `rows x cols` 0/1 matrix. Every row counts toward
 * support, including empty ones. Item ids are column indices.
 *
 * # Safety
 * `matrix` must point to `rows * cols` readable bytes; `sets_out` must be writable.
 */
enum TrStatus tr_apriori(const uint8_t *matrix,
                         size_t rows,
                         size_t cols,
                         double minsup,
                         struct TrItemsets **sets_out);

/**
 * # Safety
 * `sets` must come from [`tr_apriori`]; `count_out` must be writable.
 */
enum TrStatus tr_itemsets_count(const struct TrItemsets *sets, size_t *count_out);

/**
 * Itemset `index`: its sorted items (borrowed from the handle), row count and support.
 *
 * # Safety
 * `sets` must come from [`tr_apriori`]; the out pointers must be writable. `items_out`
 * stays valid until the handle is freed.
 */
enum TrStatus tr_itemsets_get(const struct TrItemsets *sets,
                              size_t index,
                              const uint32_t **items_out,
                              size_t *len_out,
                              size_t *count_out,
                              double *support_out);

/**
 * # Safety
 * `sets` must be null or come from [`tr_apriori`], and not be freed twice.
 */
void tr_itemsets_free(struct TrItemsets *sets);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAXI_REGIONS_H */
