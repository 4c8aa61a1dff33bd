"""

This file defines abstract and concrete classes for handling input processing,
specifically for reading operator systems from files. It includes an
abstract base class 'Input' and a concrete implementation 'JSONInput' for
JSON documents.

"""


import json
from abc import ABC, abstractmethod
from typing import Any, List

from newton import OperatorSystem


class Input(ABC):
    """
    Abstract base class for input processing.
    This class defines the structure for handling various types of input
    and extracting operator systems from them.
    """

    def __init__(self, file_name: str):
        """
        Initialize the Input object with a file name.

        Args:
            file_name (str): The name of the input file.
        """
        self.file_name = file_name

    @abstractmethod
    def get_systems(self) -> List[OperatorSystem]:
        """
        Abstract method to extract the systems from the input file.

        Returns:
            List[OperatorSystem]: The systems in file order.
        """
        pass

    def get_original_file(self) -> str:
        """
        Return the original file name.

        Returns:
            str: The name of the input file.
        """
        return self.file_name


class JSONInput(Input):
    """
    Concrete implementation of Input class for JSON files.

    Accepted layouts are a single system {"matrices": [...]}, a list of such
    objects, or {"systems": [...]}.
    """

    def __init__(self, file_name: str):
        """
        Initialize the JSONInput object with a file name and parse the systems.

        Args:
            file_name (str): The name of the JSON file.

        Raises:
            OSError: If the file cannot be read.
            ValueError: If the content is not valid JSON or not a system layout.
        """
        super().__init__(file_name)
        with open(self.file_name, "r") as file:
            data = json.load(file)
        self.systems = self._extract_systems(data)

    def _extract_systems(self, data: Any) -> List[OperatorSystem]:
        """
        Build systems from parsed JSON.

        Returns:
            List[OperatorSystem]: The systems in file order.
        """
        if isinstance(data, dict) and "systems" in data:
            data = data["systems"]
        if isinstance(data, dict):
            data = [data]
        if not isinstance(data, list) or not data:
            raise ValueError(f"{self.file_name}: expected a system object or a non-empty list of systems")
        if not all(isinstance(item, dict) for item in data):
            raise ValueError(f"{self.file_name}: every system must be a JSON object with 'matrices'")
        return [OperatorSystem.from_dict(item) for item in data]

    def get_systems(self) -> List[OperatorSystem]:
        """
        Return the systems parsed from the JSON file.

        Returns:
            List[OperatorSystem]: The systems in file order.
        """
        return self.systems
