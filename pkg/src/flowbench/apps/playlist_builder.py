"""Playlist builder: random genre playlists, later filtered by earnings.

Requests name a genre and a size; the builder samples that many distinct
titles from the genre's catalog. Sampling is seeded per request id so
both paradigms draw identical playlists. The data stage maintains rolling
0.75-quantiles of gross earnings per genre online (no raw dataset, no
trained model); the model stage wires the builder to those quantiles and
restricts sampling to titles grossing at least the threshold.
"""

from __future__ import annotations

from ..graph import Category, GraphBuilder, Schema
from ..mlkit import QuantileSketch, quantile
from ..rng import SplitMix64, derive_seed
from ..services import ApiSpec, RoutineSpec, ServiceRegistry, ServiceSpec
from ..sim import Event, Scenario, World
from .base import ApiRoute, FbpBuild, SoaBuild, StreamRoute

DEFAULT_PARAMS = {
    "genres": ("action", "comedy", "drama"),
    "movie_rate": 1.0,
    "request_rate": 0.7,
}

GROSS_QUANTILE = 0.75

MOVIE = Schema("movie", (("title", "text"), ("genre", "text"), ("gross", "float")))
PLAYLIST_REQUEST = Schema(
    "playlist_request", (("request_id", "int"), ("genre", "text"), ("k", "int"))
)
PLAYLIST = Schema(
    "playlist", (("request_id", "int"), ("genre", "text"), ("titles", "text"))
)
GENRE_QUANTILE = Schema("genre_quantile", (("genre", "text"), ("q75", "float")))


# ----------------------------------------------------------------------
# Shared decision logic
# ----------------------------------------------------------------------


def request_rng(master_seed: int, request_id: int) -> SplitMix64:
    return SplitMix64(derive_seed(master_seed, "playlist", request_id))


def sample_playlist(genre, movies, k, rng, min_gross=None) -> list[str]:
    """Uniform sample without replacement from the genre's catalog,
    optionally restricted to titles grossing at least `min_gross`."""
    pool = [
        title
        for title, movie_genre, gross in movies
        if movie_genre == genre and (min_gross is None or gross >= min_gross)
    ]
    return rng.sample(pool, k)


def gross_threshold(grosses) -> float:
    return quantile(QuantileSketch.from_values(grosses), GROSS_QUANTILE)


# ----------------------------------------------------------------------
# Dataflow build
# ----------------------------------------------------------------------


def _builder_plain(master_seed: int):
    def transform(inputs):
        movies = [(r["title"], r["genre"], r["gross"]) for r in inputs["movies"].history]
        out = []
        for req in inputs["requests"].new:
            rng = request_rng(master_seed, req["request_id"])
            titles = sample_playlist(req["genre"], movies, req["k"], rng)
            out.append(
                {"request_id": req["request_id"], "genre": req["genre"], "titles": "|".join(titles)}
            )
        return {"playlists": out}

    return transform


def _builder_filtered(master_seed: int):
    def transform(inputs):
        movies = [(r["title"], r["genre"], r["gross"]) for r in inputs["movies"].history]
        thresholds = {}
        for rec in inputs["quantiles"].history:
            thresholds[rec["genre"]] = rec["q75"]
        out = []
        for req in inputs["requests"].new:
            rng = request_rng(master_seed, req["request_id"])
            titles = sample_playlist(
                req["genre"], movies, req["k"], rng, thresholds.get(req["genre"])
            )
            out.append(
                {"request_id": req["request_id"], "genre": req["genre"], "titles": "|".join(titles)}
            )
        return {"playlists": out}

    return transform


def _stats_node(inputs):
    grosses: dict[str, list[float]] = {}
    for rec in inputs["movies"].history:
        grosses.setdefault(rec["genre"], []).append(rec["gross"])
    touched = sorted({rec["genre"] for rec in inputs["movies"].new})
    return {
        "quantiles": [
            {"genre": genre, "q75": gross_threshold(grosses[genre])} for genre in touched
        ]
    }


def _stats_publisher(inputs):
    return {"published": [r.as_dict() for r in inputs["quantiles"].new]}


def build_fbp(stage: str, scenario: Scenario) -> FbpBuild:
    b = GraphBuilder()
    b.stream("movies", Category.INPUT, MOVIE)
    b.stream("playlist_requests", Category.INPUT, PLAYLIST_REQUEST)
    b.stream("playlists", Category.OUTPUT, PLAYLIST)

    obs_kinds = {"playlists": "playlist"}
    if stage in ("data", "ml"):
        b.stream("genre_quantiles", Category.INTERNAL, GENRE_QUANTILE)
        b.stream("genre_stats", Category.OUTPUT, GENRE_QUANTILE)
        b.node(
            "quantile_tracker",
            _stats_node,
            inputs={"movies": "movies"},
            outputs={"quantiles": "genre_quantiles"},
        )
        b.node(
            "stats_publisher",
            _stats_publisher,
            inputs={"quantiles": "genre_quantiles"},
            outputs={"published": "genre_stats"},
        )
        obs_kinds["genre_stats"] = "genre_stats"

    if stage == "ml":
        b.node(
            "builder",
            _builder_filtered(scenario.seed),
            inputs={"movies": "movies", "requests": "playlist_requests", "quantiles": "genre_quantiles"},
            outputs={"playlists": "playlists"},
            logic_version="v2",
        )
    else:
        b.node(
            "builder",
            _builder_plain(scenario.seed),
            inputs={"movies": "movies", "requests": "playlist_requests"},
            outputs={"playlists": "playlists"},
        )

    routes = {
        "movie": StreamRoute("movies"),
        "playlist_request": StreamRoute("playlist_requests"),
    }
    return FbpBuild(b.build(), routes, obs_kinds)


# ----------------------------------------------------------------------
# Service build
# ----------------------------------------------------------------------


def _catalog_service(stage: str) -> ServiceSpec:
    track_stats = stage in ("data", "ml")

    def add_movie(req, ctx):
        movies = ctx.routine("get_movies")
        ctx.routine("save_movie", str(len(movies)), dict(req))
        if track_stats:
            grosses = [
                doc["gross"]
                for doc in ctx.routine("get_movies").values()
                if doc["genre"] == req["genre"]
            ]
            ctx.routine(
                "put_genre_stats",
                req["genre"],
                {"genre": req["genre"], "n_movies": len(grosses), "q75": gross_threshold(grosses)},
            )
        return {"title": req["title"]}

    def list_by_genre(req, ctx):
        movies = [
            [doc["title"], doc["genre"], doc["gross"]]
            for doc in ctx.routine("get_movies").values()
            if doc["genre"] == req["genre"]
        ]
        return {"movies": movies}

    apis = [
        ApiSpec(
            "add_movie",
            add_movie,
            ("title", "genre", "gross"),
            ("title",),
            logic_version="v2" if track_stats else "v1",
        ),
        ApiSpec("list_by_genre", list_by_genre, ("genre",), ("movies",)),
    ]
    routines = [
        RoutineSpec("save_movie", lambda ctx, key, doc: ctx.store_put("movies", key, doc)),
        RoutineSpec("get_movies", lambda ctx: ctx.store_table("movies")),
    ]
    if track_stats:
        def genre_stats(req, ctx):
            stats = ctx.routine("get_genre_stats", req["genre"])
            if stats is None:
                return {"genre": req["genre"], "n_movies": 0, "q75": 0.0}
            return stats

        apis.append(ApiSpec("genre_stats", genre_stats, ("genre",), ("genre", "n_movies", "q75")))
        routines.extend(
            (
                RoutineSpec("put_genre_stats", lambda ctx, genre, doc: ctx.store_put("stats", genre, doc)),
                RoutineSpec("get_genre_stats", lambda ctx, genre: ctx.store_get("stats", genre)),
            )
        )
    if stage == "ml":
        def genre_quantile(req, ctx):
            stats = ctx.routine("get_genre_stats", req["genre"])
            return {
                "genre": req["genre"],
                "n_movies": 0 if stats is None else stats["n_movies"],
                "q75": 0.0 if stats is None else stats["q75"],
            }

        apis.append(
            ApiSpec("genre_quantile", genre_quantile, ("genre",), ("genre", "n_movies", "q75"))
        )
    return ServiceSpec("catalog", apis=tuple(apis), routines=tuple(routines))


def _builder_service(stage: str, scenario: Scenario) -> ServiceSpec:
    seed = scenario.seed
    filtered = stage == "ml"

    def build_playlist(req, ctx):
        movies = [tuple(m) for m in ctx.call("catalog", "list_by_genre", {"genre": req["genre"]})["movies"]]
        min_gross = None
        if filtered:
            stats = ctx.call("catalog", "genre_quantile", {"genre": req["genre"]})
            if stats["n_movies"] > 0:
                min_gross = stats["q75"]
        rng = request_rng(seed, req["request_id"])
        titles = sample_playlist(req["genre"], movies, req["k"], rng, min_gross)
        return {"request_id": req["request_id"], "genre": req["genre"], "titles": "|".join(titles)}

    return ServiceSpec(
        "builder",
        apis=(
            ApiSpec(
                "build_playlist",
                build_playlist,
                ("request_id", "genre", "k"),
                ("request_id", "genre", "titles"),
                logic_version="v2" if filtered else "v1",
            ),
        ),
    )


def build_soa(stage: str, scenario: Scenario) -> SoaBuild:
    registry = ServiceRegistry()
    registry.register(_catalog_service(stage))
    registry.register(_builder_service(stage, scenario))

    routes = {
        "movie": ApiRoute("catalog", "add_movie"),
        "playlist_request": ApiRoute("builder", "build_playlist", obs_kind="playlist"),
    }
    if stage in ("data", "ml"):
        routes["stats_poll"] = ApiRoute(
            "catalog", "genre_stats", obs_kind="genre_stats", observe_when="n_movies"
        )
    return SoaBuild(registry, routes)


# ----------------------------------------------------------------------
# World
# ----------------------------------------------------------------------


class PlaylistWorld(World):
    """Movie arrivals with uniform gross earnings, playlist requests, and
    a per-genre stats poll every tick."""

    def __init__(self, scenario: Scenario):
        super().__init__(scenario)
        p = scenario.params
        self.rng = SplitMix64(derive_seed(scenario.seed, "world", "playlist_builder"))
        self.genres = tuple(p["genres"])
        self.movie_rate = float(p["movie_rate"])
        self.request_rate = float(p["request_rate"])
        self.next_movie = 0
        self.next_request = 0
        self.catalog: list[tuple[str, str, float]] = []

    def generate_events(self, tick: int) -> list[Event]:
        events = []
        for _ in range(self.rng.poisson(self.movie_rate)):
            title = f"m{self.next_movie}"
            self.next_movie += 1
            genre = self.genres[self.rng.randrange(len(self.genres))]
            gross = self.rng.uniform(1.0, 100.0)
            self.catalog.append((title, genre, gross))
            events.append(Event(tick, "movie", {"title": title, "genre": genre, "gross": gross}))
        for _ in range(self.rng.poisson(self.request_rate)):
            events.append(
                Event(
                    tick,
                    "playlist_request",
                    {
                        "request_id": self.next_request,
                        "genre": self.genres[self.rng.randrange(len(self.genres))],
                        "k": 1 + self.rng.randrange(4),
                    },
                )
            )
            self.next_request += 1
        for genre in self.genres:
            events.append(Event(tick, "stats_poll", {"genre": genre}))
        return events
