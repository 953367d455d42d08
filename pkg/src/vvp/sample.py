"""Bundled demo project: rural ordering/delivery story with two decision points.

Topology: two forks with three options each (six branch paths), six
comprehension questions of which two sit inside specific branches, and every
scene and fork flagged as a navigation point.
"""

from __future__ import annotations

from .graph import (
    AnchorRange,
    Annotation,
    AuthorKind,
    BodyItem,
    BodyType,
    EndNode,
    ForkNode,
    ForkOption,
    MediaDescriptor,
    QuestionNode,
    SceneNode,
    VideoProject,
)

SAMPLE_PROJECT_ID = "rural-delivery-demo"


def build_sample_project() -> VideoProject:
    media = [
        MediaDescriptor("m-intro", "media/intro.mp4", 60000, "video/mp4"),
        MediaDescriptor("m-order-app", "media/order-app.mp4", 45000, "video/mp4"),
        MediaDescriptor("m-order-button", "media/order-button.mp4", 40000, "video/mp4"),
        MediaDescriptor("m-order-sensor", "media/order-sensor.mp4", 42000, "video/mp4"),
        MediaDescriptor("m-mid", "media/mid.mp4", 30000, "video/mp4"),
        MediaDescriptor("m-del-neighbor", "media/del-neighbor.mp4", 50000, "video/mp4"),
        MediaDescriptor("m-del-drone", "media/del-drone.mp4", 38000, "video/mp4"),
        MediaDescriptor("m-del-trunk", "media/del-trunk.mp4", 44000, "video/mp4"),
        MediaDescriptor("m-outro", "media/outro.mp4", 40000, "video/mp4"),
    ]
    durations = {m.media_id: m.duration_ms for m in media}

    def scene(node_id, media_id, title, nxt, nav=True):
        return SceneNode(node_id, media_id, durations[media_id], title, nxt, nav)

    nodes = [
        scene("s-intro", "m-intro", "Village shopping today", "q-intro"),
        QuestionNode(
            "q-intro",
            "What makes shopping hard for the villagers shown?",
            (
                "Shops are far away and trips cost time",
                "Products are too expensive",
                "There is no internet coverage",
            ),
            0,
            "f-order",
        ),
        ForkNode(
            "f-order",
            "How should the customer place an order?",
            (
                ForkOption("o-order-app", "Photo order via smartphone app", "s-order-app"),
                ForkOption("o-order-button", "Button next to the product", "s-order-button"),
                ForkOption("o-order-sensor", "Automatic fill-level reorder", "s-order-sensor"),
            ),
            is_nav_point=True,
        ),
        scene("s-order-app", "m-order-app", "Ordering with a photo", "q-order-app"),
        QuestionNode(
            "q-order-app",
            "What does the customer photograph to reorder?",
            ("The product itself", "A QR code at the door", "The shopping list"),
            0,
            "s-mid",
        ),
        scene("s-order-button", "m-order-button", "Ordering at the press of a button", "s-mid"),
        scene("s-order-sensor", "m-order-sensor", "Ordering without lifting a finger", "s-mid"),
        scene("s-mid", "m-mid", "From the city to the village", "q-mid"),
        QuestionNode(
            "q-mid",
            "Where does the ordered product start its journey?",
            ("A city warehouse", "A neighboring farm", "A local kiosk"),
            0,
            "f-delivery",
        ),
        ForkNode(
            "f-delivery",
            "How should the package reach the customer?",
            (
                ForkOption("o-del-neighbor", "A neighbor brings it along", "s-del-neighbor"),
                ForkOption("o-del-drone", "A drone drops it off", "s-del-drone"),
                ForkOption("o-del-trunk", "Courier leaves it in the car trunk", "s-del-trunk"),
            ),
            is_nav_point=True,
        ),
        scene("s-del-neighbor", "m-del-neighbor", "Delivery by a helpful neighbor", "q-del-neighbor"),
        QuestionNode(
            "q-del-neighbor",
            "Why does the neighbor have the package?",
            (
                "They commute to the city anyway",
                "They run the village shop",
                "They won it in a raffle",
            ),
            0,
            "s-outro",
        ),
        scene("s-del-drone", "m-del-drone", "Delivery by drone", "s-outro"),
        scene("s-del-trunk", "m-del-trunk", "Delivery into the car trunk", "s-outro"),
        scene("s-outro", "m-outro", "One service, many choices", "q-outro-1"),
        QuestionNode(
            "q-outro-1",
            "Who decides which ordering variant the service will offer?",
            ("The project stakeholders", "The delivery company", "The villagers by vote"),
            0,
            "q-outro-2",
        ),
        QuestionNode(
            "q-outro-2",
            "What should viewers do when a scene differs from their expectations?",
            ("Leave an annotation or comment", "Stop the video", "Skip to the end"),
            0,
            "n-end",
        ),
        EndNode("n-end"),
    ]

    annotations = (
        Annotation(
            "a-intro-region",
            AuthorKind.CREATOR,
            AnchorRange("s-intro", 0, 60000),
            "Why rural areas",
            (
                BodyItem(BodyType.TEXT, "The pilot region has one shop per 4,000 residents."),
                BodyItem(BodyType.IMAGE, "assets/region-map.png"),
            ),
        ),
        Annotation(
            "a-app-flow",
            AuthorKind.CREATOR,
            AnchorRange("s-order-app", 5000, 30000),
            "Order app walkthrough",
            (
                BodyItem(BodyType.TEXT, "The app recognizes the product from the photo."),
                BodyItem(BodyType.LINK, "https://example.org/order-app-mockups"),
            ),
        ),
        Annotation(
            "a-drone-specs",
            AuthorKind.CREATOR,
            AnchorRange("s-del-drone", 0, 38000),
            "Drone capabilities",
            (
                BodyItem(BodyType.TEXT, "Payload up to 4 kg, range 25 km."),
                BodyItem(BodyType.FILE, "assets/drone-datasheet.pdf"),
            ),
        ),
    )

    return VideoProject(
        id=SAMPLE_PROJECT_ID,
        title="Rural ordering and delivery",
        start_node="s-intro",
        nodes={n.node_id: n for n in nodes},
        annotations=annotations,
        media_assets={m.media_id: m for m in media},
    )
