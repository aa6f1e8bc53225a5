"""Frozen model base shared by domain values, options and configuration."""

import tomllib
from typing import TYPE_CHECKING, Any, ClassVar, Self

import tomli_w
from pydantic import PrivateAttr
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from snnmap.const import APP_NAME, APP_VERSION

if TYPE_CHECKING:
    from pathlib import Path


class BaseNode(BaseSettings):
    """Immutable pydantic model every snnmap value derives from.

    Only init arguments are honoured. ``UserConfig`` is the one subclass that
    also reads environment variables and TOML files.
    """

    model_config: ClassVar[SettingsConfigDict] = SettingsConfigDict(
        frozen=True,
        extra="forbid",
    )

    _hash: int | None = PrivateAttr(default=None)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """Restrict sources to init arguments.

        Returns:
            The init settings source alone.

        """
        return (init_settings,)

    @classmethod
    def from_toml(cls, path: Path) -> Self:
        """Validate the contents of a TOML file.

        Returns:
            A validated instance.

        Raises:
            ValueError: On malformed TOML or fields that fail validation.

        """
        return cls.model_validate(tomllib.loads(path.read_text(encoding="utf-8")))

    def to_toml(self, **header: Any) -> str:
        """Dump the non-null fields as TOML, ``header`` keys first.

        Returns:
            TOML text.

        """
        return tomli_w.dumps(header | self.model_dump(mode="json", exclude_none=True))

    @property
    def app_info(self) -> str:
        """App name and version, stamped into rendered reports."""
        return f"{APP_NAME} v{APP_VERSION}"

    def replace(self, **kwargs) -> Self:
        """Copy with ``kwargs`` applied; the copy is validated again.

        Returns:
            A new instance.

        """
        return self.model_validate(self.model_dump() | kwargs)

    def __or__(self, other: BaseNode) -> Self:
        """Overlay the explicitly set fields of ``other``.

        Fields ``other`` merely defaults are left alone, so CLI options can be
        laid over file and environment settings.

        Returns:
            A new instance of the type of ``self``.

        """
        merged = self.model_dump(exclude_unset=True) | other.model_dump(
            exclude_unset=True
        )
        return self.model_validate(merged)

    def __getitem__(self, key: str):
        """Look a field up by name, as report tabulation does.

        Returns:
            The field value.

        """
        return getattr(self, key)

    def __eq__(self, other: object) -> bool:
        """Compare field values; the cached hash takes no part.

        Returns:
            Whether both are the same type with equal fields.

        """
        if not isinstance(other, BaseNode):
            return NotImplemented
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self) -> int:
        """Hash the json dump once so values can key dicts and caches.

        Returns:
            The cached hash.

        """
        if self._hash is None:
            self._hash = hash(self.model_dump_json())
        return self._hash
