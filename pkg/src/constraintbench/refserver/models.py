"""Domain entities for the Conduit-style article platform."""

from dataclasses import dataclass, field


@dataclass
class User:
    username: str
    email: str
    password: str
    bio: str = ""
    image: str = ""


@dataclass
class Article:
    slug: str
    title: str
    description: str
    body: str
    tag_list: list
    author: str
    created_at: str
    updated_at: str
    favorited_by: set = field(default_factory=set)


@dataclass
class Comment:
    id: int
    article_slug: str
    body: str
    author: str
    created_at: str
    updated_at: str
